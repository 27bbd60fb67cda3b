#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>

#include "embedded_data.hpp"
#include "sizer/error.hpp"
#include "sizer/evaluator.hpp"

namespace sizer {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

struct Ctx {
  const ValueMap& x;
  const std::map<std::string, double>& c;

  double v(const char* name) const {
    auto it = x.find(name);
    if (it == x.end()) throw OutOfBounds(std::string("point lacks variable '") + name + "'");
    return it->second;
  }
  double k(const char* name) const {
    auto it = c.find(name);
    if (it == c.end()) throw ConfigError(std::string("model file lacks constant '") + name + "'");
    return it->second;
  }

  // Smooth blend of square-law and weak-inversion transconductance.
  double gm(double mobility, double w, double l, double i) const {
    const double strong = std::sqrt(2.0 * mobility * (w / l) * i);
    const double weak = i / k("nut");
    return strong * weak / (strong + weak);
  }
  double softplus(double a) const {
    const double eps = k("sp_eps");
    return 0.5 * (a + std::sqrt(a * a + eps * eps));
  }
};

double atan_deg(double a) { return std::atan(a) * 180.0 / kPi; }
double parallel(double a, double b) { return a * b / (a + b); }
double sq(double a) { return a * a; }

ValueMap ota(const Ctx& m) {
  const double un = m.k("un"), up = m.k("up"), cln = m.k("cln"), clp = m.k("clp"), iref = m.k("iref");
  const double w1 = m.v("w1"), l1 = m.v("l1"), w3 = m.v("w3"), l3 = m.v("l3"), w5 = m.v("w5"), l5 = m.v("l5");
  const double w6 = m.v("w6"), l6 = m.v("l6"), k7 = m.v("k7"), cc = m.v("cc");
  const double i5 = m.v("k5") * iref, i7 = k7 * iref;
  const double gm1 = m.gm(un, w1, l1, i5 / 2), gm6 = m.gm(up, w6, l6, i7), gm3 = m.gm(up, w3, l3, i5 / 2);
  const double a1 = gm1 / ((cln / l1 + clp / l3) * i5 / 2);
  const double a2 = gm6 / ((clp / l6 + cln / l5) * i7);
  const double gbw = gm1 / (2 * kPi * cc);
  const double cout = m.k("cl") + m.k("cj") * (w6 + k7 * w5);
  const double p2 = gm6 / (2 * kPi * cout);
  const double z = gm6 / (2 * kPi * cc);
  const double p3 = gm3 / (2 * kPi * 2 * (2.0 / 3) * m.k("cox") * w3 * l3);
  return {{"gain", 20 * std::log10(a1 * a2)},
          {"gbw", gbw},
          {"pm", 90 - atan_deg(gbw / p2) - atan_deg(gbw / z) - atan_deg(gbw / p3)},
          {"power", m.k("vdd") * (iref + i5 + i7)}};
}

ValueMap fcota(const Ctx& m) {
  const double un = m.k("un"), up = m.k("up"), cln = m.k("cln"), clp = m.k("clp"), iref = m.k("iref");
  const double cox = m.k("cox"), cj = m.k("cj");
  const double it = m.v("kt") * iref, id1 = it / 2, ifold = m.v("kf") * iref;
  const double ic = m.softplus(ifold - id1);
  const double gm1 = std::sqrt(m.gm(un, m.v("w1"), m.v("l1"), id1) * m.gm(un, m.v("w2"), m.v("l2"), id1));
  const double ro1 = 1 / (cln / m.v("l1") * id1);
  const double ro3 = 1 / (clp / m.v("l3") * ifold);
  const double ro5 = 1 / (clp / m.v("l5") * ic);
  const double ro8 = 1 / (cln / m.v("l8") * ic);
  const double ro10 = 1 / (cln / m.v("l10") * ic);
  const double gm5 = m.gm(up, m.v("w5"), m.v("l5"), ic);
  const double gm3 = m.gm(up, m.v("w3"), m.v("l3"), ifold);
  const double gm7 = m.gm(un, m.v("w7"), m.v("l7"), ic);
  const double gm9 = m.gm(un, m.v("w9"), m.v("l9"), ic);
  const double gm10 = m.gm(un, m.v("w10"), m.v("l10"), ic);
  const double rout = parallel(gm5 * ro5 * parallel(ro3, ro1), gm10 * ro10 * ro8);
  const double gbw = gm1 / (2 * kPi * m.v("cl"));
  const double cf = cj * (m.v("w1") + m.v("w3") + m.v("w5")) + (2.0 / 3) * cox * m.v("w5") * m.v("l5");
  const double pf = gm5 / (2 * kPi * cf);
  const double cm = (2.0 / 3) * cox * (m.v("w9") * m.v("l9") + m.v("w10") * m.v("l10")) + m.v("cb");
  const double pmirror = gm9 / (2 * kPi * cm);
  const double mm = sq(std::log(m.v("w1") / m.v("w2"))) + sq(std::log(m.v("l1") / m.v("l2"))) +
                    sq(std::log(m.v("w7") / m.v("w8"))) + sq(std::log(m.v("l7") / m.v("l8"))) +
                    sq(std::log(m.v("w9") / m.v("w10"))) + sq(std::log(m.v("l9") / m.v("l10")));
  const double rtail = 1 / (m.k("tail_conductance") * it);
  const double ro9 = 1 / (cln / m.v("l9") * ic);
  const double cmrr = 20 * std::log10(2 * gm1 * rtail * gm9 * ro9) + m.k("cmrr_offset") -
                      10 * std::log10(1 + mm / sq(m.k("mismatch_sigma")));
  return {{"gain", 20 * std::log10(m.k("gain_boost") * gm1 * rout)},
          {"gbw", gbw},
          {"pm", 90 - atan_deg(gbw / pf) - atan_deg(gbw / pmirror)},
          {"power", m.k("vdd") * (2 * iref + it + 2 * ifold)},
          {"psrr", 20 * std::log10(gm1 * gm5 * ro5 * ro3) + m.k("psrr_offset")},
          {"cmrr", cmrr},
          {"noise", m.k("noise_scale") * std::sqrt(m.k("kt") / m.v("cl") * (1 + gm3 / gm1 + gm7 / gm1))}};
}

ValueMap sacmp(const Ctx& m) {
  const double un = m.k("un"), up = m.k("up"), cj = m.k("cj"), kt = m.k("kt"), vov = m.k("vov");
  const double cl = m.v("cl"), cx = m.v("cx"), wb = m.v("wb");
  double it = 0.5 * un * (m.v("wt") / m.v("lt")) * vov * vov;
  it = it / (1 + it / m.k("tail_saturation"));
  const double gmin = m.gm(un, m.v("win"), m.v("lin"), it / 2);
  const double cpar =
      cj * (2 * m.v("win") + m.v("wt") + 2 * m.v("wn") + 2 * m.v("wp") + 4 * m.v("wr") + 2 * wb);
  const double power = m.k("fclk") * (2 * cl + 2 * cx + cpar) * sq(m.k("vdd"));
  const double t1 = (cx + cl) * m.k("integration_swing") / (it / 2);
  const double gml = m.gm(un, m.v("wn"), m.v("ln"), it / 2) + m.gm(up, m.v("wp"), m.v("lp"), it / 2);
  const double t2 = m.k("regeneration_factor") * (cl + cj * (m.v("wn") + m.v("wp") + wb)) / gml;
  const double ibuf = 0.5 * up * (wb / m.v("lb")) * vov * vov;
  const double t3 = m.k("cext") * m.k("buffer_swing") / ibuf;
  const double ron = 1 / (up * (m.v("wr") / m.v("lr")) * vov);
  return {{"power", power},
          {"tset", t1 + t2 + t3},
          {"treset", m.k("reset_factor") * (cl + cx + cj * wb) * ron + t3},
          {"noise", std::sqrt(2 * kt * m.k("gamma") / (gmin * t1) + m.k("ktc_fraction") * kt / (cx + cl))}};
}

ValueMap ldo(const Ctx& m) {
  const double un = m.k("un"), up = m.k("up"), cln = m.k("cln"), clp = m.k("clp"), iref = m.k("iref");
  const double cox = m.k("cox"), cj = m.k("cj"), il = m.k("il"), kfn = m.k("kfn"), kfp = m.k("kfp");
  const double i5 = m.v("k5") * iref, i7 = m.v("k7") * iref, i9 = m.v("k9") * iref;
  const double gm1 = std::sqrt(m.gm(un, m.v("w1"), m.v("l1"), i5 / 2) * m.gm(un, m.v("w2"), m.v("l2"), i5 / 2));
  const double gm3 = m.gm(up, m.v("w3"), m.v("l3"), i5 / 2);
  const double ro2 = 1 / (cln / m.v("l2") * i5 / 2);
  const double ro4 = 1 / (clp / m.v("l4") * i5 / 2);
  const double aea = gm1 * parallel(ro2, ro4);
  const double beta = m.v("r2") / (m.v("r1") + m.v("r2"));
  const double wp = m.v("wp") * m.v("kp"), lp = m.v("lp"), cout = m.v("cout");
  const double gmp = std::sqrt(2 * up * (wp / lp) * il);
  const double rop = 1 / (clp / lp * il);
  const double cg = (2.0 / 3) * cox * wp * lp + cj * (m.v("w6") + m.v("w7")) + 0.1 * (2.0 / 3) * cox * m.v("w7") * m.v("l7");
  const double pg = m.gm(un, m.v("w6"), m.v("l6"), i7) / (2 * kPi * cg);
  double fu = beta * aea * gmp / (2 * kPi * cout);
  fu = fu / (1 + fu / m.k("fu_limit"));
  const double tslew = cg * m.k("slew_swing") / (i7 + i9);
  const double mm = sq(std::log(m.v("w1") / m.v("w2"))) + sq(std::log(m.v("l1") / m.v("l2"))) +
                    sq(std::log(m.v("w3") / m.v("w4"))) + sq(std::log(m.v("l3") / m.v("l4")));
  const double dvtr = il * (1 / (2 * kPi * fu) + tslew) / cout;
  const double flicker = 2 * (kfn / (cox * m.v("w1") * m.v("l1")) + kfp / (cox * m.v("w3") * m.v("l3")) * sq(gm3 / gm1)) +
                         0.1 * kfn / (cox * m.v("w8") * m.v("l8")) + 0.1 * kfn / (cox * m.v("w5") * m.v("l5")) +
                         0.05 * kfp / (cox * m.v("w9") * m.v("l9"));
  return {{"dv", std::sqrt(sq(dvtr) + sq(m.k("mismatch_gain")) * mm)},
          {"tsetup", m.k("settle_tau") / (2 * kPi * fu) * (1 + fu / pg) + tslew},
          {"psrr", 0.5 * 20 * std::log10(beta * aea * gmp * rop) + 0.5 * 20 * std::log10(1 + cout / cg)},
          {"noise", std::sqrt(flicker) / beta},
          {"dropout", il / (up * (wp / lp) * m.k("vovp"))}};
}

using Formula = std::function<ValueMap(const Ctx&)>;

const std::map<std::string, Formula>& formulas() {
  static const std::map<std::string, Formula> table{{"ota", ota}, {"fcota", fcota}, {"sacmp", sacmp}, {"ldo", ldo}};
  return table;
}

ValueMap values_from_json(const json& j) {
  ValueMap out;
  for (const auto& [k, v] : j.items()) out[k] = v.get<double>();
  return out;
}

}  // namespace

std::unique_ptr<MockModel> MockModel::from_json(const json& j) {
  try {
    if (j.value("schema", std::string{}) != kModelSchema) throw SchemaError("not a model document (schema tag)");
    std::unique_ptr<MockModel> m(new MockModel());
    m->name_ = j.at("name").get<std::string>();
    if (!formulas().count(m->name_)) throw SchemaError("no closed-form model named '" + m->name_ + "'");
    m->title_ = j.value("title", m->name_);
    m->variables_ = variables_from_json(j.at("variables"));
    m->constants_ = j.at("constants").get<std::map<std::string, double>>();
    for (const auto& mj : j.at("metrics")) {
      m->metric_names_.push_back(mj.at("name").get<std::string>());
      m->units_[m->metric_names_.back()] = mj.value("unit", std::string{});
    }
    m->certified_ = values_from_json(j.at("certified"));
    m->nominal_ = values_from_json(j.at("nominal"));
    return m;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model document is malformed: ") + e.what());
  }
}

std::unique_ptr<MockModel> MockModel::builtin(std::string_view name) {
  for (const auto& e : detail::embedded_models())
    if (e.name == name) return from_json(json::parse(e.text));
  throw ConfigError("no built-in mock model '" + std::string(name) + "'");
}

std::unique_ptr<MockModel> MockModel::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file '" + path + "'");
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw SchemaError("model file '" + path + "' is not valid JSON: " + e.what());
  }
}

std::vector<std::string> MockModel::metrics() const { return metric_names_; }

Measurement MockModel::run(const ValueMap& point) {
  Measurement out;
  const ValueMap metrics = formulas().at(name_)(Ctx{point, constants_});
  for (const auto& name : metric_names_) {
    auto it = metrics.find(name);
    if (it == metrics.end() || !std::isfinite(it->second))
      out.failed.insert(name);
    else
      out.values[name] = it->second;
  }
  return out;
}

json MockModel::to_json() const {
  json metrics = json::array();
  for (const auto& n : metric_names_) metrics.push_back({{"name", n}, {"unit", units_.at(n)}});
  return {{"schema", std::string(kModelSchema)}, {"name", name_},          {"title", title_},
          {"constants", constants_},             {"variables", variables_to_json(variables_)},
          {"metrics", metrics},                  {"certified", certified_}, {"nominal", nominal_}};
}

std::vector<std::string> mock_model_names() {
  std::vector<std::string> out;
  for (const auto& e : detail::embedded_models()) out.emplace_back(e.name);
  return out;
}

std::vector<std::unique_ptr<MockModel>> mock_models() {
  std::vector<std::unique_ptr<MockModel>> out;
  for (const auto& n : mock_model_names()) out.push_back(MockModel::builtin(n));
  return out;
}

}  // namespace sizer
