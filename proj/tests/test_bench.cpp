#include <doctest.h>

#include <fstream>
#include <sstream>

#include "pdsplit/bench.hpp"
#include "pdsplit/rng.hpp"

#include "helpers.hpp"

using namespace pdsplit;
using namespace pdsplit::testing;

TEST_CASE("libsvm reader: format examples") {
  const std::string path = "/tmp/pds_libsvm_fmt.txt";
  {
    std::ofstream f(path);
    f << "1 1:0.5 3:2\n";
    f << "0\n";
  }
  auto [w, a] = bench::read_libsvm(path, 3);
  REQUIRE(w.rows() == 2);
  REQUIRE(w.cols() == 3);
  CHECK(w(0, 0) == 0.5);
  CHECK(w(0, 1) == 0.0);
  CHECK(w(0, 2) == 2.0);
  CHECK(a[0] == 1.0);
  CHECK(w.row(1).norm() == 0.0);
  CHECK(a[1] == 0.0);
}

TEST_CASE("libsvm reader: errors carry line numbers") {
  const std::string path = "/tmp/pds_libsvm_bad.txt";
  {
    std::ofstream f(path);
    f << "1 1:0.5\n";
    f << "1 nonsense\n";
  }
  CHECK_THROWS_WITH_AS(bench::read_libsvm(path), doctest::Contains("line 2"),
                       Error);
  {
    std::ofstream f(path);
    f << "1 2:1 2:3\n";
  }
  CHECK_THROWS_WITH_AS(bench::read_libsvm(path),
                       doctest::Contains("duplicate index 2"), Error);
  {
    std::ofstream f(path);
    f << "1 0:1\n";
  }
  CHECK_THROWS_AS(bench::read_libsvm(path), Error);
}

TEST_CASE("libsvm reader: binary labels remapped to {0,1}") {
  const std::string path = "/tmp/pds_libsvm_labels.txt";
  {
    std::ofstream f(path);
    f << "2 1:1\n1 1:2\n2 1:3\n";
  }
  auto [w, a] = bench::read_libsvm(path);
  CHECK(a[0] == 1.0);
  CHECK(a[1] == 0.0);
  CHECK(a[2] == 1.0);
}

TEST_CASE("libsvm writer round-trips to byte-identical canonical form") {
  const std::string p1 = "/tmp/pds_libsvm_rt1.txt";
  const std::string p2 = "/tmp/pds_libsvm_rt2.txt";
  {
    std::ofstream f(p1);
    f << "1 1:0.5 3:2\n";
    f << "0 2:-1.25\n";
    f << "1 1:1e-3 2:7 4:0.125\n";
    f << "0\n";
    f << "1 4:123456.75\n";
  }
  auto [w, a] = bench::read_libsvm(p1, 4);
  bench::write_libsvm(p2, w, a);
  auto [w2, a2] = bench::read_libsvm(p2, 4);
  CHECK((w - w2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a - a2).cwiseAbs().maxCoeff() == 0.0);
  // Writing the canonical form again reproduces it byte for byte.
  const std::string p3 = "/tmp/pds_libsvm_rt3.txt";
  bench::write_libsvm(p3, w2, a2);
  std::ifstream f2(p2), f3(p3);
  std::stringstream s2, s3;
  s2 << f2.rdbuf();
  s3 << f3.rdbuf();
  CHECK(s2.str() == s3.str());
  CHECK(!s2.str().empty());
}

TEST_CASE("fused lasso generator: structure and determinism") {
  bench::FusedLassoParams prm;
  prm.p = 20;
  prm.n = 15;
  prm.seed = 5;
  bench::BenchProblem a = bench::generate_fused_lasso(prm);
  bench::BenchProblem b = bench::generate_fused_lasso(prm);
  CHECK(a.spec.L.kind() == LinOp::Kind::FirstDifference);
  CHECK(a.spec.R.kind() == ProxFn::Kind::Zero);
  CHECK(a.spec.H.kind() == ProxFn::Kind::L1);
  CHECK(a.spec.F.mu() > 0.0);  // ridge folded into F
  CHECK((a.spec.F.data_matrix() - b.spec.F.data_matrix())
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK(a.meta.at("lambda").get<double>() ==
        doctest::Approx(a.meta.at("nu0").get<double>() / prm.n));
  prm.seed = 6;
  bench::BenchProblem c = bench::generate_fused_lasso(prm);
  CHECK((a.spec.F.data_matrix() - c.spec.F.data_matrix())
            .cwiseAbs()
            .maxCoeff() > 0.0);
}

TEST_CASE("group lasso generator: grid neighborhoods of sizes 3..5") {
  bench::GroupLassoLogisticParams prm;
  prm.n = 30;
  prm.grid = 5;
  bench::BenchProblem gp = bench::generate_group_lasso_logistic(prm);
  CHECK(gp.spec.L.kind() == LinOp::Kind::GroupSelector);
  const auto& groups = gp.spec.L.groups();
  CHECK(groups.size() == 25);
  for (const auto& g : groups) {
    CHECK(g.size() >= 3);
    CHECK(g.size() <= 5);
  }
  CHECK(gp.spec.H.kind() == ProxFn::Kind::L2NormSum);
  CHECK(gp.spec.F.kind() == SmoothFn::Kind::LogisticL2);
  CHECK(gp.spec.dual_dim() == gp.spec.L.out_dim());
}

TEST_CASE("pca lasso generator: stacked random blocks") {
  bench::PcaLassoParams prm;
  prm.n = 20;
  prm.p = 12;
  prm.m = 4;
  prm.rows_per_block = 6;
  bench::BenchProblem pp = bench::generate_pca_lasso(prm);
  CHECK(pp.spec.L.kind() == LinOp::Kind::VStack);
  CHECK(pp.spec.L.children().size() == 4);
  CHECK(pp.spec.L.out_dim() == 24);
  CHECK(pp.spec.R.kind() == ProxFn::Kind::L1);
  CHECK(pp.spec.H.kind() == ProxFn::Kind::L2NormSum);
}

TEST_CASE("decentralized generator: gossip laplacian spectra") {
  bench::DecentralizedQuadraticParams prm;
  prm.nodes = 6;
  prm.dim = 2;
  prm.graph = bench::GraphKind::Ring;
  bench::BenchProblem dp = bench::generate_decentralized_quadratic(prm);
  CHECK(dp.local_fns.size() == 6);
  CHECK(dp.spec.L.kind() == LinOp::Kind::GossipKron);
  CHECK(dp.spec.spectral.omega_or_throw() > 0.0);
  // Ring Laplacian row sums vanish.
  CHECK((dp.what * Vector::Ones(6)).cwiseAbs().maxCoeff() <= 1e-12);

  // Complete graph: eigenvalues {0, n, ..., n}.
  Matrix comp = bench::graph_laplacian(bench::GraphKind::Complete, 5, 0.5, 1);
  SpectralInfo si = spectral_info(LinOp::gossip_kron(comp, 1));
  CHECK(si.op_norm_sq == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(si.omega_or_throw() == doctest::Approx(5.0).epsilon(1e-9));

  // Erdos sampling is deterministic given the seed and always connected.
  Matrix e1 = bench::graph_laplacian(bench::GraphKind::Erdos, 12, 0.3, 9);
  Matrix e2 = bench::graph_laplacian(bench::GraphKind::Erdos, 12, 0.3, 9);
  CHECK((e1 - e2).cwiseAbs().maxCoeff() == 0.0);
  SpectralInfo se = spectral_info(LinOp::gossip_kron(e1, 1));
  CHECK(se.omega_or_throw() > 0.0);
}

TEST_CASE("grid search: single point returns that point") {
  bench::FusedLassoParams prm;
  prm.p = 10;
  prm.n = 8;
  bench::BenchProblem fl = bench::generate_fused_lasso(prm);
  bench::GridConfig grid;
  grid.solvers = {SolverKind::Pd3o};
  grid.estimators = {{EstimatorKind::Full, 0.5, 16}};
  grid.gamma_exp_min = grid.gamma_exp_max = 0;
  grid.tau_rules = {0.9};
  grid.iters = 200;
  auto best = bench::grid_search(fl, grid);
  REQUIRE(best.size() == 1);
  CHECK(best[0].gamma == doctest::Approx(1.0 / fl.spec.F.nu()));
  CHECK(best[0].tau ==
        doctest::Approx(0.9 / (best[0].gamma * fl.spec.spectral.op_norm_sq)));
}

TEST_CASE("grid search: strongly convex full gradient favors the largest "
          "stable gamma") {
  // Ill-conditioned quadratic; gradient descent in disguise (R = H = 0).
  RngStream rs(111, 0);
  const Index d = 8;
  Matrix evals = Vector::LinSpaced(d, 0.1, 10.0).asDiagonal();
  Eigen::HouseholderQR<Matrix> qr(random_matrix(rs, d, d));
  Matrix q_rot = qr.householderQ();
  Matrix q = q_rot * evals * q_rot.transpose();
  q = 0.5 * (q + q.transpose());
  bench::BenchProblem prob;
  prob.name = "quad";
  prob.spec = ProblemSpec::make(SmoothFn::quadratic(q, random_vector(rs, d)),
                                ProxFn::zero(), ProxFn::zero(),
                                LinOp::zero(d, 1));
  bench::GridConfig grid;
  grid.solvers = {SolverKind::Pd3o};
  grid.estimators = {{EstimatorKind::Full, 0.5, 16}};
  grid.gamma_exp_min = -2;
  grid.gamma_exp_max = 2;  // gamma in {0.44, 0.67, 1, 1.5, 2.25} / nu
  grid.iters = 800;
  auto best = bench::grid_search(prob, grid);
  REQUIRE(best.size() == 1);
  // 2.25/nu diverges; 1.5/nu is the largest stable value and wins.
  CHECK(best[0].gamma == doctest::Approx(1.5 / prob.spec.F.nu()));
  CHECK(best[0].out_of_theorem);  // beyond the 1/(2 nu) ergodic cap
  CHECK(!best[0].diverged);
}

TEST_CASE("grid search: reports when everything diverges") {
  RngStream rs(112, 0);
  const Index d = 4;
  bench::BenchProblem prob;
  prob.name = "quad";
  prob.spec = ProblemSpec::make(
      SmoothFn::quadratic(spd_matrix(rs, d, 0.4), random_vector(rs, d)),
      ProxFn::zero(), ProxFn::zero(), LinOp::zero(d, 1));
  bench::GridConfig grid;
  grid.solvers = {SolverKind::Pd3o};
  grid.estimators = {{EstimatorKind::Full, 0.5, 16}};
  grid.gamma_exp_min = 12;  // gamma ~ 130/nu: hopeless
  grid.gamma_exp_max = 13;
  grid.iters = 3000;
  CHECK_THROWS_WITH_AS(bench::grid_search(prob, grid),
                       doctest::Contains("diverged"), Error);
}

TEST_CASE("grid search: stochastic condat-vu pairs are skipped") {
  bench::FusedLassoParams prm;
  prm.p = 8;
  prm.n = 6;
  bench::BenchProblem fl = bench::generate_fused_lasso(prm);
  bench::GridConfig grid;
  grid.solvers = {SolverKind::CondatVu31};
  grid.estimators = {{EstimatorKind::SAGA, 0.5, 16},
                     {EstimatorKind::Full, 0.5, 16}};
  grid.gamma_exp_min = grid.gamma_exp_max = 0;
  grid.tau_rules = {0.5};
  grid.iters = 100;
  auto best = bench::grid_search(fl, grid);
  REQUIRE(best.size() == 1);  // only the Full pairing survives
  CHECK(best[0].estimator.kind == EstimatorKind::Full);
}

TEST_CASE("generated problems pass the module invariant spot checks") {
  bench::FusedLassoParams prm;
  prm.p = 14;
  prm.n = 10;
  bench::BenchProblem fl = bench::generate_fused_lasso(prm);
  RngStream rs(113, 0);
  // Adjoint consistency of the generated operator and gradient sanity.
  for (int t = 0; t < 20; ++t) {
    Vector x = random_vector(rs, fl.spec.primal_dim());
    Vector y = random_vector(rs, fl.spec.dual_dim());
    CHECK(std::abs(fl.spec.L.apply(x).dot(y) - x.dot(fl.spec.L.adjoint(y))) <=
          1e-10 * (1.0 + x.norm() * y.norm()));
  }
  Vector x = random_vector(rs, fl.spec.primal_dim());
  Vector fd = fd_gradient([&](const Vector& v) { return fl.spec.F.value(v); },
                          x);
  CHECK((fl.spec.F.grad(x) - fd).norm() <= 1e-5 * (1.0 + fd.norm()));
}
