#include "oamq/io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace oamq {

Json density_to_json(const Matrix4cd &rho) {
  Json re = Json::array(), im = Json::array();
  for (int i = 0; i < 4; ++i) {
    Json r = Json::array(), m = Json::array();
    for (int k = 0; k < 4; ++k) {
      r.push_back(rho(i, k).real());
      m.push_back(rho(i, k).imag());
    }
    re.push_back(r);
    im.push_back(m);
  }
  return {{"real", re}, {"imag", im}};
}

Matrix4cd density_from_json(const Json &j) {
  auto grid = [&](const char *key) {
    if (!j.is_object() || !j.contains(key))
      throw InvalidInput(std::string("density matrix: missing '") + key + "'");
    const Json &g = j.at(key);
    if (!g.is_array() || g.size() != 4)
      throw InvalidInput("density matrix: expected 4 rows");
    Eigen::Matrix4d m;
    for (int i = 0; i < 4; ++i) {
      if (!g[i].is_array() || g[i].size() != 4)
        throw InvalidInput("density matrix: expected 4 columns");
      for (int k = 0; k < 4; ++k) {
        if (!g[i][k].is_number())
          throw InvalidInput("density matrix: non-numeric entry");
        m(i, k) = g[i][k].get<double>();
      }
    }
    return m;
  };
  for (const auto &[k, v] : j.items())
    if (k != "real" && k != "imag")
      throw InvalidInput("density matrix: unknown key '" + k + "'");
  Matrix4cd rho;
  rho.real() = grid("real");
  rho.imag() = grid("imag");
  return rho;
}

// ---------------------------------------------------------------------------

void write_histogram_csv(std::ostream &os, const CoincidenceHistogram &hist, const std::vector<std::string> &comments) {
  char buf[64];
  for (const auto &c : comments)
    os << "# " << c << '\n';
  os << "bin_width_ns,duration_s\n";
  std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", hist.bin_width_ns, hist.duration_s);
  os << buf << "bin_index,tau_ns,counts\n";
  for (int i = 0; i < hist.n_bins(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%lld\n", i, hist.tau_ns(i), static_cast<long long>(hist.counts[i]));
    os << buf;
  }
}

namespace {

std::vector<std::string> split_csv(const std::string &line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ','))
    out.push_back(field);
  return out;
}

double to_double(const std::string &s, int line_no) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception &) {
    pos = 0;
  }
  if (pos == 0 || s.find_first_not_of(" \t\r", pos) != std::string::npos)
    throw InvalidInput("histogram csv line " + std::to_string(line_no) + ": not a number: '" + s + "'");
  return v;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

} // namespace

CoincidenceHistogram read_histogram_csv(std::istream &is) {
  std::vector<std::pair<int, std::string>> lines;
  std::string line;
  for (int no = 1; std::getline(is, line); ++no) {
    line = trim(line);
    if (line.empty() || line[0] == '#')
      continue;
    lines.emplace_back(no, line);
  }
  if (lines.size() < 3 || lines[0].second != "bin_width_ns,duration_s" || lines[2].second != "bin_index,tau_ns,counts")
    throw InvalidInput("histogram csv: missing header lines");
  const auto meta = split_csv(lines[1].second);
  if (meta.size() != 2)
    throw InvalidInput("histogram csv: expected bin_width_ns,duration_s values");
  CoincidenceHistogram h;
  h.bin_width_ns = to_double(meta[0], lines[1].first);
  h.duration_s = to_double(meta[1], lines[1].first);
  if (!(h.bin_width_ns > 0.0) || !(h.duration_s >= 0.0))
    throw InvalidInput("histogram csv: bin width must be positive and duration non-negative");
  for (std::size_t k = 3; k < lines.size(); ++k) {
    const auto &[no, text] = lines[k];
    const auto f = split_csv(text);
    if (f.size() != 3)
      throw InvalidInput("histogram csv line " + std::to_string(no) + ": expected 3 fields");
    const double idx = to_double(f[0], no);
    const double cnt = to_double(f[2], no);
    if (idx != static_cast<double>(h.counts.size()))
      throw InvalidInput("histogram csv line " + std::to_string(no) + ": bins must be consecutive from 0");
    if (!(cnt >= 0.0) || cnt != std::floor(cnt))
      throw InvalidInput("histogram csv line " + std::to_string(no) + ": counts must be non-negative integers");
    h.counts.push_back(static_cast<std::int64_t>(cnt));
  }
  if (h.counts.empty())
    throw InvalidInput("histogram csv: no bins");
  return h;
}

// ---------------------------------------------------------------------------

namespace {

double number(const Json &j, const char *key, const char *where) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_number())
    throw InvalidInput(std::string(where) + ": missing numeric '" + key + "'");
  return j.at(key).get<double>();
}

void only_keys(const Json &j, std::initializer_list<const char *> keys, const std::string &where) {
  if (!j.is_object())
    throw InvalidInput(where + ": expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto &[k, v] : j.items())
    if (!allowed.count(k))
      throw InvalidInput(where + ": unknown key '" + k + "'");
}

} // namespace

Json projector_to_json(const QubitProjector &p) {
  Json j{{"theta_bloch", p.theta_bloch}, {"phi_bloch", p.phi_bloch}};
  if (p.efficiency != 1.0)
    j["efficiency"] = p.efficiency;
  return j;
}

QubitProjector projector_from_json(const Json &j) {
  only_keys(j, {"theta_bloch", "phi_bloch", "efficiency"}, "projector");
  QubitProjector p;
  p.theta_bloch = number(j, "theta_bloch", "projector");
  p.phi_bloch = number(j, "phi_bloch", "projector");
  if (j.contains("efficiency"))
    p.efficiency = number(j, "efficiency", "projector");
  if (!(p.efficiency > 0.0) || !std::isfinite(p.theta_bloch) || !std::isfinite(p.phi_bloch))
    throw InvalidInput("projector: invalid angles or efficiency");
  return p;
}

Json records_to_json(const std::vector<MeasurementRecord> &records) {
  Json a = Json::array();
  for (const auto &r : records)
    a.push_back({{"stokes", projector_to_json(r.stokes)},
                 {"antistokes", projector_to_json(r.antistokes)},
                 {"counts", r.counts},
                 {"exposure_s", r.exposure_s}});
  return a;
}

std::vector<MeasurementRecord> records_from_json(const Json &j) {
  if (!j.is_array())
    throw InvalidInput("records: expected a list");
  std::vector<MeasurementRecord> out;
  for (const auto &e : j) {
    only_keys(e, {"stokes", "antistokes", "counts", "exposure_s"}, "record");
    MeasurementRecord r;
    r.stokes = projector_from_json(e.at("stokes"));
    r.antistokes = projector_from_json(e.at("antistokes"));
    if (!e.contains("counts") || !e.at("counts").is_number_integer() || e.at("counts").get<std::int64_t>() < 0)
      throw InvalidInput("record: counts must be a non-negative integer");
    r.counts = e.at("counts").get<std::int64_t>();
    r.exposure_s = e.contains("exposure_s") ? number(e, "exposure_s", "record") : 1.0;
    if (!(r.exposure_s > 0.0))
      throw InvalidInput("record: exposure must be positive");
    out.push_back(r);
  }
  return out;
}

Json sweep_points_to_json(const std::vector<SweepPoint> &pts) {
  Json a = Json::array();
  for (const auto &p : pts)
    a.push_back({{"x0", p.x0}, {"signal", p.signal}, {"uncertainty", p.uncertainty}});
  return a;
}

std::vector<SweepPoint> sweep_points_from_json(const Json &j) {
  if (!j.is_array())
    throw InvalidInput("sweep points: expected a list");
  std::vector<SweepPoint> out;
  for (const auto &e : j) {
    only_keys(e, {"x0", "signal", "uncertainty"}, "sweep point");
    out.push_back({number(e, "x0", "sweep point"), number(e, "signal", "sweep point"),
                   number(e, "uncertainty", "sweep point")});
  }
  return out;
}

Json fit_to_json(const SweepFit &f) {
  return {{"theta", f.theta},         {"w", f.w},
          {"amplitude", f.amplitude}, {"offset", f.offset},
          {"residual", f.residual},   {"iterations", f.iterations},
          {"converged", f.converged}, {"degenerate", f.degenerate}};
}

Json tomography_to_json(const TomographyResult &r) {
  return {{"rho", density_to_json(r.rho)},
          {"fidelity_to_bell", r.fidelity_to_bell},
          {"concurrence", r.concurrence},
          {"eof", r.eof},
          {"optimizer",
           {{"log_likelihood", r.log_likelihood},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"accepted_steps", r.likelihood_history.empty() ? 0 : r.likelihood_history.size() - 1}}}};
}

// ---------------------------------------------------------------------------

DensityMatrix4 StateSpec::density() const {
  switch (kind) {
  case Kind::Werner:
    return werner_state(werner_p);
  case Kind::Explicit:
    return rho;
  default:
    return pure_density(make_pair_state(alpha1));
  }
}

std::string config_hash(const Json &j) {
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

// Typed reads from a config object that track which keys were consumed.
class Section {
public:
  Section(const Json &j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object())
      throw InvalidInput("config " + where_ + ": expected an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions())
      return;
    for (const auto &[k, v] : j_.items())
      if (!used_.count(k))
        throw InvalidInput("config " + where_ + ": unknown key '" + k + "'");
  }

  bool has(const std::string &k) const { return j_.contains(k); }
  const Json &raw(const std::string &k) {
    used_.insert(k);
    return j_.at(k);
  }
  void num(const std::string &k, double &out) {
    if (!has(k))
      return;
    const Json &v = raw(k);
    if (!v.is_number())
      throw InvalidInput("config " + where_ + "." + k + ": expected a number");
    out = v.get<double>();
  }
  void integer(const std::string &k, int &out) {
    if (!has(k))
      return;
    const Json &v = raw(k);
    if (!v.is_number_integer())
      throw InvalidInput("config " + where_ + "." + k + ": expected an integer");
    out = v.get<int>();
  }
  void flag(const std::string &k, bool &out) {
    if (!has(k))
      return;
    const Json &v = raw(k);
    if (!v.is_boolean())
      throw InvalidInput("config " + where_ + "." + k + ": expected true or false");
    out = v.get<bool>();
  }
  void text(const std::string &k, std::string &out) {
    if (!has(k))
      return;
    const Json &v = raw(k);
    if (!v.is_string() || v.get<std::string>().empty())
      throw InvalidInput("config " + where_ + "." + k + ": expected a file name");
    out = v.get<std::string>();
    if (out.find('/') != std::string::npos || out == "." || out == "..")
      throw InvalidInput("config " + where_ + "." + k + ": output names are relative to --out");
  }

private:
  const Json &j_;
  std::string where_;
  std::set<std::string> used_;
};

std::uint64_t parse_seed(const Json &v) {
  if (v.is_number_unsigned())
    return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw InvalidInput("config seed: expected a non-negative integer");
}

void parse_source(const Json &j, RunConfig &c) {
  Section s(j, "source");
  auto &src = c.source;
  s.num("stokes_rate", src.stokes_rate);
  s.num("antistokes_rate", src.antistokes_rate);
  if (s.has("pair_rate")) {
    s.num("pair_rate", src.pair_rate);
    c.pair_rate_given = true;
  }
  if (s.has("g_target")) {
    double g = 0.0;
    s.num("g_target", g);
    c.g_target = g;
  }
  s.num("peak_delay_ns", src.wavepacket.peak_delay_ns);
  s.num("rise_time_ns", src.wavepacket.rise_time_ns);
  s.num("decay_time_ns", src.wavepacket.decay_time_ns);
  s.num("window_ns", src.wavepacket.window_ns);
  s.num("bin_width_ns", src.bin_width_ns);
  s.integer("n_bins", src.n_bins);
  s.num("efficiency_s", src.efficiency_s);
  s.num("efficiency_as", src.efficiency_as);
  s.num("duration_s", src.duration_s);
}

void parse_state(const Json &j, StateSpec &st) {
  Section s(j, "state");
  const int kinds = s.has("alpha1") + s.has("werner_p") + s.has("rho");
  if (kinds > 1)
    throw InvalidInput("config state: give one of alpha1, werner_p, rho");
  if (s.has("alpha1")) {
    const Json &a = s.raw("alpha1");
    st.kind = StateSpec::Kind::PairState;
    if (a.is_number())
      st.alpha1 = a.get<double>();
    else if (a.is_array() && a.size() == 2 && a[0].is_number() && a[1].is_number())
      st.alpha1 = {a[0].get<double>(), a[1].get<double>()};
    else
      throw InvalidInput("config state.alpha1: expected a number or [re, im]");
  } else if (s.has("werner_p")) {
    st.kind = StateSpec::Kind::Werner;
    s.num("werner_p", st.werner_p);
  } else if (s.has("rho")) {
    st.kind = StateSpec::Kind::Explicit;
    st.rho = density_from_json(s.raw("rho"));
  }
  validate_density_matrix(st.density());
}

void parse_sweep(const Json &j, RunConfig::Sweep &sw) {
  Section s(j, "sweep");
  s.num("duration_s", sw.duration_s);
  s.integer("antistokes_order", sw.antistokes_order);
  s.integer("fit_order", sw.fit_order);
  s.flag("noiseless", sw.noiseless);
  if (s.has("x0")) {
    const Json &g = s.raw("x0");
    Section x(g, "sweep.x0");
    double lo = 0.0, hi = 0.0;
    int n = 0;
    x.num("min", lo);
    x.num("max", hi);
    x.integer("n", n);
    if (n < 2 || !(hi > lo))
      throw InvalidInput("config sweep.x0: need n >= 2 and max > min");
    sw.x0_list.clear();
    for (int i = 0; i < n; ++i)
      sw.x0_list.push_back(lo + (hi - lo) * i / (n - 1));
  }
  if (s.has("curves")) {
    const Json &arr = s.raw("curves");
    if (!arr.is_array() || arr.empty())
      throw InvalidInput("config sweep.curves: expected a non-empty list");
    sw.curves.clear();
    for (const auto &e : arr) {
      Section cs(e, "sweep.curves[]");
      SweepCurveSpec c;
      if (!cs.has("label") || !cs.raw("label").is_string())
        throw InvalidInput("config sweep.curves[]: missing label");
      c.label = cs.raw("label").get<std::string>();
      if (cs.has("x0") == cs.has("balanced"))
        throw InvalidInput("config sweep.curves[]: give exactly one of x0, balanced");
      if (cs.has("x0")) {
        double x = 0.0;
        cs.num("x0", x);
        c.x0 = x;
      } else {
        cs.integer("balanced", c.balanced_sign);
        if (c.balanced_sign != 1 && c.balanced_sign != -1)
          throw InvalidInput("config sweep.curves[].balanced: expected +1 or -1");
      }
      sw.curves.push_back(c);
    }
  }
  if (!(sw.duration_s > 0.0))
    throw InvalidInput("config sweep.duration_s: must be positive");
  if (std::abs(sw.antistokes_order) != 1 || std::abs(sw.fit_order) != 1)
    throw InvalidInput("config sweep: orders must be +1 or -1");
}

} // namespace

RunConfig parse_run_config(const Json &j) {
  RunConfig c;
  {
    Section s(j, "root");
    if (!s.has("schema_version") || !s.raw("schema_version").is_number_integer())
      throw InvalidInput("config: missing integer schema_version");
    c.schema_version = s.raw("schema_version").get<int>();
    if (c.schema_version != 1)
      throw InvalidInput("config: unsupported schema_version " + std::to_string(c.schema_version));
    if (s.has("seed"))
      c.seed = parse_seed(s.raw("seed"));
    s.num("waist_mm", c.waist_mm);
    if (s.has("quadrature")) {
      Section q(s.raw("quadrature"), "quadrature");
      q.integer("n_radial", c.quadrature.n_radial);
      q.integer("n_azimuthal", c.quadrature.n_azimuthal);
      q.num("r_max_in_waists", c.quadrature.r_max_in_waists);
    }
    if (s.has("source"))
      parse_source(s.raw("source"), c);
    if (s.has("analysis")) {
      Section a(s.raw("analysis"), "analysis");
      a.num("tail_start_ns", c.windows.tail_start_ns);
      a.num("signal_lo_ns", c.windows.signal_lo_ns);
      a.num("signal_hi_ns", c.windows.signal_hi_ns);
      a.num("g_tau_ns", c.g_tau_ns);
    }
    if (s.has("state"))
      parse_state(s.raw("state"), c.state);
    if (s.has("sweep"))
      parse_sweep(s.raw("sweep"), c.sweep);
    if (s.has("tomography")) {
      Section t(s.raw("tomography"), "tomography");
      t.num("counts_per_setting", c.tomography.counts_per_setting);
      t.integer("max_iter", c.tomography.mle.max_iter);
      t.num("tol", c.tomography.mle.tol);
      if (t.has("design")) {
        const Json &d = t.raw("design");
        if (!d.is_string() || (d != "ideal" && d != "physical"))
          throw InvalidInput("config tomography.design: expected \"ideal\" or \"physical\"");
        c.tomography.physical_design = d == "physical";
      }
      if (!(c.tomography.counts_per_setting >= 0.0) || c.tomography.mle.max_iter < 1 || !(c.tomography.mle.tol > 0.0))
        throw InvalidInput("config tomography: invalid counts or optimizer options");
    }
    if (s.has("outputs")) {
      Section o(s.raw("outputs"), "outputs");
      auto &out = c.outputs;
      o.text("histogram", out.histogram);
      o.text("analysis", out.analysis);
      o.text("sweep", out.sweep);
      o.text("fit", out.fit);
      o.text("records", out.records);
      o.text("tomography", out.tomography);
      o.text("report", out.report);
    }
  }
  if (!(c.waist_mm > 0.0))
    throw InvalidInput("config waist_mm: must be positive");
  validate_quadrature(c.quadrature);
  c.source.seed = c.seed;
  if (!c.pair_rate_given && c.g_target)
    c.source.pair_rate = calibrate_pair_rate(c.source, *c.g_target, c.g_tau_ns);
  validate_source(c.source);
  if (c.sweep.x0_list.empty())
    for (int i = 0; i <= 40; ++i)
      c.sweep.x0_list.push_back(c.waist_mm * (-2.0 + 0.1 * i));
  if (c.sweep.curves.empty())
    c.sweep.curves = {{"zero", 20.0 * c.waist_mm, 0}, {"one", 0.0, 0}, {"plus", {}, 1}, {"minus", {}, -1}};
  c.hash = config_hash(j);
  return c;
}

RunConfig load_run_config(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw InvalidInput("config: cannot open " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error &e) {
    throw InvalidInput(std::string("config: malformed JSON: ") + e.what());
  }
  return parse_run_config(j);
}

} // namespace oamq
