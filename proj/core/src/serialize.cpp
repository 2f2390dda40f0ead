#include "pdsplit/serialize.hpp"

namespace pdsplit {

using nlohmann::json;

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i)
    v[i] = j[static_cast<size_t>(i)].get<double>();
  return v;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  const auto r = static_cast<Index>(j.size());
  const auto c = r > 0 ? static_cast<Index>(j[0].size()) : 0;
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index k = 0; k < c; ++k)
      m(i, k) = j[static_cast<size_t>(i)][static_cast<size_t>(k)].get<double>();
  return m;
}

json to_json(const PddyState& s) {
  return json{{"p", vector_to_json(s.p)},
              {"y", vector_to_json(s.y)},
              {"gamma", s.gamma},
              {"tau", s.tau},
              {"lstar_y", vector_to_json(s.lstar_y)},
              {"last_x", vector_to_json(s.last_x)},
              {"last_s", vector_to_json(s.last_s)}};
}

PddyState pddy_state_from_json(const json& j) {
  PddyState s;
  s.p = vector_from_json(j.at("p"));
  s.y = vector_from_json(j.at("y"));
  s.gamma = j.at("gamma").get<double>();
  s.tau = j.at("tau").get<double>();
  s.lstar_y = vector_from_json(j.at("lstar_y"));
  s.last_x = vector_from_json(j.at("last_x"));
  s.last_s = vector_from_json(j.at("last_s"));
  return s;
}

json to_json(const Pd3oState& s) {
  return json{{"p", vector_to_json(s.p)},
              {"y", vector_to_json(s.y)},
              {"gamma", s.gamma},
              {"tau", s.tau},
              {"lstar_y", vector_to_json(s.lstar_y)},
              {"last_x", vector_to_json(s.last_x)}};
}

Pd3oState pd3o_state_from_json(const json& j) {
  Pd3oState s;
  s.p = vector_from_json(j.at("p"));
  s.y = vector_from_json(j.at("y"));
  s.gamma = j.at("gamma").get<double>();
  s.tau = j.at("tau").get<double>();
  s.lstar_y = vector_from_json(j.at("lstar_y"));
  s.last_x = vector_from_json(j.at("last_x"));
  return s;
}

json to_json(const CondatVuState& s) {
  return json{{"form", s.form == CondatVuForm::Alg31 ? "alg31" : "alg32"},
              {"x", vector_to_json(s.x)},
              {"d", vector_to_json(s.d)},
              {"gamma", s.gamma},
              {"tau", s.tau}};
}

CondatVuState condat_vu_state_from_json(const json& j) {
  CondatVuState s;
  s.form = j.at("form").get<std::string>() == "alg31" ? CondatVuForm::Alg31
                                                      : CondatVuForm::Alg32;
  s.x = vector_from_json(j.at("x"));
  s.d = vector_from_json(j.at("d"));
  s.gamma = j.at("gamma").get<double>();
  s.tau = j.at("tau").get<double>();
  return s;
}

json to_json(const LicoState& s) {
  return json{{"x", vector_to_json(s.x)},
              {"y", vector_to_json(s.y)},
              {"gamma", s.gamma},
              {"tau", s.tau},
              {"lstar_y", vector_to_json(s.lstar_y)}};
}

LicoState lico_state_from_json(const json& j) {
  LicoState s;
  s.x = vector_from_json(j.at("x"));
  s.y = vector_from_json(j.at("y"));
  s.gamma = j.at("gamma").get<double>();
  s.tau = j.at("tau").get<double>();
  s.lstar_y = vector_from_json(j.at("lstar_y"));
  return s;
}

json to_json(const PriLicoState& s) {
  return json{{"x", vector_to_json(s.x)},
              {"a", vector_to_json(s.a)},
              {"gamma", s.gamma},
              {"tau", s.tau}};
}

PriLicoState prilico_state_from_json(const json& j) {
  PriLicoState s;
  s.x = vector_from_json(j.at("x"));
  s.a = vector_from_json(j.at("a"));
  s.gamma = j.at("gamma").get<double>();
  s.tau = j.at("tau").get<double>();
  return s;
}

json to_json(const DestroyState& s) {
  json xs = json::array(), as = json::array(), ts = json::array();
  for (const auto& v : s.x) xs.push_back(vector_to_json(v));
  for (const auto& v : s.a) as.push_back(vector_to_json(v));
  for (const auto& v : s.t) ts.push_back(vector_to_json(v));
  return json{{"x", std::move(xs)},   {"a", std::move(as)},
              {"t", std::move(ts)},   {"what", matrix_to_json(s.what)},
              {"gamma", s.gamma},     {"tau", s.tau}};
}

DestroyState destroy_state_from_json(const json& j) {
  DestroyState s;
  for (const auto& v : j.at("x")) s.x.push_back(vector_from_json(v));
  for (const auto& v : j.at("a")) s.a.push_back(vector_from_json(v));
  for (const auto& v : j.at("t")) s.t.push_back(vector_from_json(v));
  s.what = matrix_from_json(j.at("what"));
  s.gamma = j.at("gamma").get<double>();
  s.tau = j.at("tau").get<double>();
  return s;
}

struct SerdeAccess {
  static json dump(const Estimator& e) {
    json j;
    j["kind"] = estimator_name(e.kind_);
    j["seed"] = e.seed_;
    j["count"] = e.count_;
    j["initialized"] = e.initialized_;
    j["p"] = e.p_;
    j["batch"] = e.batch_;
    j["ref_point"] = vector_to_json(e.ref_point_);
    j["ref_grad"] = vector_to_json(e.ref_grad_);
    json table = json::array();
    for (const auto& t : e.table_) table.push_back(vector_to_json(t));
    j["table"] = std::move(table);
    j["table_mean"] = vector_to_json(e.table_mean_);
    j["drift"] = e.drift_;
    return j;
  }
  static Estimator load(const json& j) {
    Estimator e;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "full") e.kind_ = EstimatorKind::Full;
    else if (kind == "minibatch") e.kind_ = EstimatorKind::Minibatch;
    else if (kind == "lsvrg") e.kind_ = EstimatorKind::LSVRG;
    else if (kind == "saga") e.kind_ = EstimatorKind::SAGA;
    else throw Error("estimator_from_json: unknown kind " + kind);
    e.seed_ = j.at("seed").get<std::uint64_t>();
    e.count_ = j.at("count").get<std::uint64_t>();
    e.initialized_ = j.at("initialized").get<bool>();
    e.p_ = j.at("p").get<double>();
    e.batch_ = j.at("batch").get<int>();
    e.ref_point_ = vector_from_json(j.at("ref_point"));
    e.ref_grad_ = vector_from_json(j.at("ref_grad"));
    for (const auto& t : j.at("table"))
      e.table_.push_back(vector_from_json(t));
    e.table_mean_ = vector_from_json(j.at("table_mean"));
    e.drift_ = j.at("drift").get<double>();
    return e;
  }
};

json to_json(const Estimator& e) { return SerdeAccess::dump(e); }

Estimator estimator_from_json(const json& j) { return SerdeAccess::load(j); }

}  // namespace pdsplit
