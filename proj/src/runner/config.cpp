#include "invmh/errors.hpp"
#include "invmh/runner.hpp"
#include "invmh/samplers_fd.hpp"
#include "invmh/samplers_hilbert.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace invmh::runner {

namespace {

/// Reads the members of one JSON object, remembering which keys were used
/// so that leftovers (typos) can be reported.
class Fields {
 public:
  Fields(const Json& obj, std::string pointer) : obj_(obj), pointer_(std::move(pointer)) {
    if (!obj_.is_object()) throw ConfigError(where() + ": must be an object");
  }

  std::string where(const std::string& key = {}) const {
    const std::string base = pointer_.empty() ? "" : pointer_;
    if (key.empty()) return base.empty() ? "/" : base;
    return base + "/" + key;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(where(key) + ": " + msg);
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const Json& raw(const std::string& key) {
    used_.insert(key);
    return obj_.at(key);
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    if (!has(key)) {
      if (!fallback) fail(key, "is required");
      return *fallback;
    }
    const Json& v = raw(key);
    if (!v.is_number()) fail(key, "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(key, "must be finite");
    return x;
  }

  double positive(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const double x = number(key, fallback);
    if (!(x > 0.0)) fail(key, "must be positive");
    return x;
  }

  long long integer(const std::string& key, std::optional<long long> fallback, long long min_value,
                    long long max_value = std::numeric_limits<long long>::max()) {
    long long x;
    if (!has(key)) {
      if (!fallback) fail(key, "is required");
      x = *fallback;
    } else {
      const Json& v = raw(key);
      if (!v.is_number_integer()) fail(key, "must be an integer");
      if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(max_value))
        fail(key, "is too large");
      x = v.get<long long>();
    }
    if (x < min_value) fail(key, "must be at least " + std::to_string(min_value));
    if (x > max_value) fail(key, "must be at most " + std::to_string(max_value));
    return x;
  }

  std::uint64_t unsigned_integer(const std::string& key) {
    if (!has(key)) fail(key, "is required");
    const Json& v = raw(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0))
      fail(key, "must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    if (!has(key)) {
      if (!fallback) fail(key, "is required");
      return *fallback;
    }
    const Json& v = raw(key);
    if (!v.is_string()) fail(key, "must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_array() || v.empty()) fail(key, "must be a non-empty array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !std::isfinite(v[i].get<double>()))
        fail(key + "/" + std::to_string(i), "must be a finite number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, _] : obj_.items())
      if (!used_.count(key)) fail(key, "unknown key");
  }

 private:
  const Json& obj_;
  std::string pointer_;
  std::set<std::string> used_;
};

const std::set<std::string> kFdSamplers = {"rwmc", "mala", "hmc", "relativistic_hmc", "rmhmc",
                                           "surrogate_hmc"};
const std::set<std::string> kHilbertSamplers = {"pcn", "inf_mala", "inf_hmc", "gen_langevin"};

Json array_of(const std::vector<double>& x) {
  Json a = Json::array();
  for (double v : x) a.push_back(v);
  return a;
}

std::vector<double> to_std(const Json& a) {
  std::vector<double> out;
  for (const auto& v : a) out.push_back(v.get<double>());
  return out;
}

/// Returns the normalized target and its dimension.
std::pair<Json, Index> parse_target(const Json& j) {
  Fields f(j, "/target");
  const std::string type = f.string("type");
  Json out;
  out["type"] = type;
  Index dim = 0;
  if (type == "standard_gaussian") {
    dim = static_cast<Index>(f.integer("dim", std::nullopt, 1, 100000));
    out["dim"] = dim;
  } else if (type == "anisotropic_gaussian") {
    const auto var = f.numbers("variances");
    for (std::size_t i = 0; i < var.size(); ++i)
      if (!(var[i] > 0.0)) f.fail("variances/" + std::to_string(i), "must be positive");
    dim = static_cast<Index>(var.size());
    out["variances"] = array_of(var);
  } else if (type == "rosenbrock") {
    out["a"] = f.number("a", 1.0);
    out["b"] = f.positive("b", 5.0);
    dim = 2;
  } else if (type == "hilbert") {
    const bool list = f.has("eigenvalues"), law = f.has("power_law");
    if (list == law) f.fail("", "give exactly one of \"eigenvalues\" or \"power_law\"");
    std::vector<double> lambda;
    if (list) {
      lambda = f.numbers("eigenvalues");
      out["eigenvalues"] = array_of(lambda);
    } else {
      Fields p(f.raw("power_law"), f.where("power_law"));
      const auto d = static_cast<Index>(p.integer("dim", std::nullopt, 1, 100000));
      const double c = p.positive("c", 1.0);
      const double pw = p.number("p", 2.0);
      if (pw < 0.0) p.fail("p", "must be non-negative");
      p.finish();
      out["power_law"] = {{"dim", d}, {"c", c}, {"p", pw}};
      const auto g = SpectralGaussian<double>::power_law(d, c, pw);
      lambda.assign(g.eigenvalues().data(), g.eigenvalues().data() + d);
    }
    try {
      SpectralGaussian<double>(Eigen::Map<const Eigen::VectorXd>(lambda.data(), static_cast<Index>(lambda.size())));
    } catch (const ConfigError& e) {
      throw ConfigError(f.where(list ? "eigenvalues" : "power_law") + ": " + e.what());
    }
    dim = static_cast<Index>(lambda.size());

    Json phi_out;
    if (!f.has("phi")) {
      phi_out["type"] = "zero";
    } else {
      Fields p(f.raw("phi"), f.where("phi"));
      const std::string pt = p.string("type");
      phi_out["type"] = pt;
      if (pt == "linear") {
        if (!p.has("a")) p.fail("a", "is required");
        const Json& a = p.raw("a");
        std::vector<double> av;
        if (a.is_number()) {
          av.assign(static_cast<std::size_t>(dim), a.get<double>());
        } else {
          av = p.numbers("a");
          if (static_cast<Index>(av.size()) != dim)
            p.fail("a", "must have " + std::to_string(dim) + " entries");
        }
        phi_out["a"] = array_of(av);
      } else if (pt != "zero" && pt != "quartic") {
        p.fail("type", "unknown Phi \"" + pt + "\" (zero, quartic, linear)");
      }
      p.finish();
    }
    out["phi"] = phi_out;
  } else {
    f.fail("type", "unknown target \"" + type + "\" (see `invmh list`)");
  }
  f.finish();
  return {out, dim};
}

Json parse_sampler(const Json& j, const Json& target, Index dim) {
  Fields f(j, "/sampler");
  const std::string type = f.string("type");
  const bool hilbert_target = target["type"] == "hilbert";
  if (!kFdSamplers.count(type) && !kHilbertSamplers.count(type))
    f.fail("type", "unknown sampler \"" + type + "\" (see `invmh list`)");
  if (kHilbertSamplers.count(type) && !hilbert_target)
    f.fail("type", "sampler \"" + type + "\" needs a hilbert target");

  Json out;
  out["type"] = type;
  auto step_count = [&](long long fallback) { return f.integer("n", fallback, 1, 100000); };
  if (type == "rwmc") {
    out["step"] = f.positive("step", 0.5);
  } else if (type == "mala") {
    out["delta"] = f.positive("delta", 0.5);
  } else if (type == "hmc") {
    out["delta"] = f.positive("delta", 0.2);
    out["n"] = step_count(10);
    if (f.has("mass")) {
      const auto m = f.numbers("mass");
      if (static_cast<Index>(m.size()) != dim) f.fail("mass", "must have " + std::to_string(dim) + " entries");
      for (std::size_t i = 0; i < m.size(); ++i)
        if (!(m[i] > 0.0)) f.fail("mass/" + std::to_string(i), "must be positive");
      out["mass"] = array_of(m);
    }
  } else if (type == "relativistic_hmc") {
    out["delta"] = f.positive("delta", 0.2);
    out["n"] = step_count(10);
    out["m"] = f.positive("m", 1.0);
    out["c"] = f.positive("c", 1.0);
  } else if (type == "rmhmc") {
    out["delta"] = f.positive("delta", 0.2);
    out["n"] = step_count(5);
    const std::string metric = f.string("metric", "one_plus_q2");
    if (metric != "identity" && metric != "one_plus_q2")
      f.fail("metric", "unknown metric \"" + metric + "\" (identity, one_plus_q2)");
    out["metric"] = metric;
  } else if (type == "surrogate_hmc") {
    out["delta"] = f.positive("delta", 0.2);
    out["n"] = step_count(10);
    out["surrogate_scale"] = f.positive("surrogate_scale", 1.0);
    const std::string scheme = f.string("scheme", "leapfrog");
    if (scheme != "leapfrog" && scheme != "stormer_verlet")
      f.fail("scheme", "unknown scheme \"" + scheme + "\" (leapfrog, stormer_verlet)");
    out["scheme"] = scheme;
  } else if (type == "pcn") {
    if (f.has("rho") && f.has("delta")) f.fail("", "give at most one of \"rho\" or \"delta\"");
    if (f.has("rho")) {
      const double rho = f.number("rho");
      if (!(rho > -1.0 && rho <= 1.0)) f.fail("rho", "must lie in (-1, 1]");
      out["rho"] = rho;
    } else {
      const double delta = f.number("delta", 0.5);
      if (!(delta >= 0.0)) f.fail("delta", "must be non-negative");
      out["delta"] = delta;
    }
  } else if (type == "inf_mala") {
    out["delta"] = f.positive("delta", 0.5);
  } else if (type == "inf_hmc") {
    const double delta = f.positive("delta", 0.5);
    out["delta"] = delta;
    out["n"] = step_count(5);
    out["delta1"] = f.positive("delta1", delta / 2.0);
    out["delta2"] = f.positive("delta2", delta);
    const std::string aux = f.string("aux", "reference");
    if (aux != "reference" && aux != "geometric")
      f.fail("aux", "unknown velocity law \"" + aux + "\" (reference, geometric)");
    out["aux"] = aux;
    if (aux == "geometric") out["aux_scale"] = f.positive("aux_scale", 1.0);
  } else if (type == "gen_langevin") {
    out["delta"] = f.positive("delta", 0.5);
    out["surrogate_scale"] = f.number("surrogate_scale", 1.0);
  }
  f.finish();
  return out;
}

// ---- kernels -------------------------------------------------------------

SpectralGaussian<double> reference_of(const Json& t) {
  if (t.contains("eigenvalues")) {
    const auto v = to_std(t["eigenvalues"]);
    return SpectralGaussian<double>(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size())));
  }
  const auto& p = t["power_law"];
  return SpectralGaussian<double>::power_law(p["dim"].get<Index>(), p["c"].get<double>(),
                                             p["p"].get<double>());
}

TargetPotential<double> phi_of(const Json& phi, Index dim) {
  const std::string type = phi["type"];
  if (type == "quartic") return quartic_phi<double>(dim);
  if (type == "linear") {
    const auto a = to_std(phi["a"]);
    return linear_phi<double>(Eigen::Map<const Eigen::VectorXd>(a.data(), dim));
  }
  return zero_phi<double>(dim);
}

/// U on R^d: the density of a finite-dimensional target, or Phi plus the
/// Gaussian reference term for a hilbert target.
TargetPotential<double> potential_of(const Json& t, Index dim) {
  const std::string type = t["type"];
  using V = Eigen::VectorXd;
  if (type == "standard_gaussian")
    return {[](const V& q) { return 0.5 * q.squaredNorm(); }, [](const V& q) -> V { return q; }, dim};
  if (type == "anisotropic_gaussian") {
    const auto var = to_std(t["variances"]);
    const V inv = Eigen::Map<const V>(var.data(), dim).cwiseInverse();
    return {[inv](const V& q) { return 0.5 * q.cwiseAbs2().dot(inv); },
            [inv](const V& q) -> V { return q.cwiseProduct(inv); }, dim};
  }
  if (type == "rosenbrock") {
    const double a = t["a"], b = t["b"];
    return {[a, b](const V& q) {
              const double r = q[1] - q[0] * q[0];
              return (a - q[0]) * (a - q[0]) + b * r * r;
            },
            [a, b](const V& q) -> V {
              const double r = q[1] - q[0] * q[0];
              V g(2);
              g << -2.0 * (a - q[0]) - 4.0 * b * q[0] * r, 2.0 * b * r;
              return g;
            },
            dim};
  }
  const auto ref = reference_of(t);
  const auto phi = phi_of(t["phi"], dim);
  const V inv = ref.eigenvalues().cwiseInverse();
  return {[phi, inv](const V& q) { return phi(q) + 0.5 * q.cwiseAbs2().dot(inv); },
          [phi, inv](const V& q) -> V { return phi.grad(q) + q.cwiseProduct(inv); }, dim};
}

InvolutiveKernel<double> fd_kernel(const Json& s, TargetPotential<double> u) {
  const std::string type = s["type"];
  const Index d = u.dim;
  if (type == "rwmc") return rwmc(u, gaussian_jump<double>(d, s["step"].get<double>()));
  if (type == "mala") return mala(u, s["delta"].get<double>());
  HmcConfig<double> cfg;
  cfg.delta = s["delta"];
  cfg.n = s["n"];
  if (type == "hmc") {
    if (s.contains("mass")) {
      const auto m = to_std(s["mass"]);
      cfg.mass = MassMatrix<double>::diagonal(Eigen::Map<const Eigen::VectorXd>(m.data(), d));
    }
    return hmc(u, cfg);
  }
  if (type == "relativistic_hmc") return relativistic_hmc(u, s["m"].get<double>(), s["c"].get<double>(), cfg);
  if (type == "rmhmc") {
    auto metric = s["metric"] == "identity" ? constant_metric<double>(Eigen::MatrixXd::Identity(d, d))
                                            : one_plus_q2_metric<double>();
    return rmhmc(u, metric, cfg.delta, cfg.n);
  }
  // surrogate_hmc: kick along -scale * grad U, unit Gaussian velocities.
  const double scale = s["surrogate_scale"];
  PhaseField<double> f1 = [](const Eigen::VectorXd&, const Eigen::VectorXd& v) -> Eigen::VectorXd { return v; };
  VectorField<double> f2q = [g = u.grad, scale](const Eigen::VectorXd& q) -> Eigen::VectorXd { return -scale * g(q); };
  SurrogateScheme<double> scheme;
  if (s["scheme"] == "stormer_verlet") {
    scheme = StormerVerletScheme<double>{
        cfg.delta, f1, [f2q](const Eigen::VectorXd& q, const Eigen::VectorXd&) { return f2q(q); }, {}};
  } else {
    scheme = LeapfrogScheme<double>{cfg.delta / 2, cfg.delta,
                                    [](const Eigen::VectorXd& v) -> Eigen::VectorXd { return v; }, f2q};
  }
  auto aux = gaussian_momentum<double>(d);
  return surrogate_hmc(u, aux, scheme, cfg.n);
}

InvolutiveKernel<double> hilbert_kernel(const Json& s, const Json& t, Index dim) {
  const std::string type = s["type"];
  auto target = make_hilbert_target(phi_of(t["phi"], dim), reference_of(t));
  if (type == "pcn")
    return s.contains("rho") ? pcn(target, s["rho"].get<double>())
                             : pcn_from_delta(target, s["delta"].get<double>());
  if (type == "inf_mala") return inf_mala(target, s["delta"].get<double>());
  if (type == "gen_langevin") {
    const double scale = s["surrogate_scale"];
    VectorField<double> f = [g = target.surrogate_f, scale](const Eigen::VectorXd& q) -> Eigen::VectorXd {
      return scale * g(q);
    };
    return gen_langevin(target, f, s["delta"].get<double>());
  }
  // inf_hmc
  auto law = AuxLaw<double>::reference();
  if (s["aux"] == "geometric") {
    const Eigen::VectorXd k = s["aux_scale"].get<double>() * target.reference.eigenvalues();
    VectorField<double> kf = [k](const Eigen::VectorXd&) -> Eigen::VectorXd { return k; };
    law = AuxLaw<double>::diagonal(kf);
    target.surrogate_f = geometric_surrogate(target.phi, target.reference, kf);
  }
  return inf_hmc(target, law, s["delta1"].get<double>(), s["delta2"].get<double>(), s["n"].get<int>());
}

}  // namespace

Json ExperimentConfig::to_json() const {
  Json j;
  j["target"] = target;
  j["sampler"] = sampler;
  Json r;
  r["n_steps"] = run.n_steps;
  r["burn_in"] = run.burn_in;
  r["n_chains"] = run.n_chains;
  r["seed"] = run.seed;
  if (run.q0) r["q0"] = array_of(*run.q0);
  j["run"] = r;
  Json o;
  if (output.directory) o["directory"] = *output.directory;
  o["thin"] = output.thin;
  j["output"] = o;
  return j;
}

ExperimentConfig parse_config(const Json& j) {
  Fields top(j, "");
  ExperimentConfig cfg;
  if (!top.has("target")) top.fail("target", "is required");
  if (!top.has("sampler")) top.fail("sampler", "is required");
  if (!top.has("run")) top.fail("run", "is required");
  auto [target, dim] = parse_target(top.raw("target"));
  cfg.target = std::move(target);
  cfg.sampler = parse_sampler(top.raw("sampler"), cfg.target, dim);

  Fields r(top.raw("run"), "/run");
  cfg.run.n_steps = static_cast<std::size_t>(r.integer("n_steps", std::nullopt, 0, 100'000'000));
  cfg.run.burn_in = static_cast<std::size_t>(r.integer("burn_in", 0, 0));
  if (cfg.run.burn_in > cfg.run.n_steps) r.fail("burn_in", "exceeds n_steps");
  cfg.run.n_chains = static_cast<int>(r.integer("n_chains", 1, 1, 256));
  cfg.run.seed = r.unsigned_integer("seed");
  if (r.has("q0")) {
    auto q0 = r.numbers("q0");
    if (static_cast<Index>(q0.size()) != dim) r.fail("q0", "must have " + std::to_string(dim) + " entries");
    cfg.run.q0 = std::move(q0);
  }
  r.finish();

  if (top.has("output")) {
    Fields o(top.raw("output"), "/output");
    if (o.has("directory")) cfg.output.directory = o.string("directory");
    cfg.output.thin = static_cast<std::size_t>(o.integer("thin", 1, 1));
    o.finish();
  }
  top.finish();

  // Surface constructor-level failures (e.g. a non-positive-definite mass)
  // as config errors too.
  try {
    (void)build_experiment(cfg);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("/sampler: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Map the byte offset to line:column.
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    if (const auto pos = what.find("syntax error"); pos != std::string::npos) what = what.substr(pos);
    throw ConfigError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
  }
  try {
    return parse_config(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

Experiment build_experiment(const ExperimentConfig& cfg) {
  const std::string t = cfg.target["type"];
  Index dim;
  if (t == "standard_gaussian") dim = cfg.target["dim"].get<Index>();
  else if (t == "anisotropic_gaussian") dim = static_cast<Index>(cfg.target["variances"].size());
  else if (t == "rosenbrock") dim = 2;
  else dim = reference_of(cfg.target).dim();

  const std::string s = cfg.sampler["type"];
  Experiment ex;
  if (kHilbertSamplers.count(s))
    ex.kernel = std::make_shared<const InvolutiveKernel<double>>(hilbert_kernel(cfg.sampler, cfg.target, dim));
  else
    ex.kernel = std::make_shared<const InvolutiveKernel<double>>(fd_kernel(cfg.sampler, potential_of(cfg.target, dim)));
  ex.q0 = cfg.run.q0 ? Eigen::Map<const Eigen::VectorXd>(cfg.run.q0->data(), dim).eval()
                     : Eigen::VectorXd::Zero(dim).eval();
  if (!std::isfinite(ex.kernel->target()(ex.q0)))
    throw ConfigError("/run/q0: target density is zero at the initial state");
  return ex;
}

std::string list_builtins() {
  return R"(targets
  standard_gaussian      dim: int
  anisotropic_gaussian   variances: [number > 0, ...]
  rosenbrock             a: number = 1, b: number > 0 = 5           (d = 2)
  hilbert                eigenvalues: [non-increasing > 0, ...]
                         | power_law: {dim: int, c: number = 1, p: number = 2}
                         phi: {type: zero}                          (default)
                            | {type: quartic}                       1/2 s^2/(1+s), s = |q|^2
                            | {type: linear, a: number | [number, ...]}

samplers (any target; a hilbert target is sampled through Phi + 1/2|C^{-1/2}q|^2)
  rwmc                   step: number > 0 = 0.5
  mala                   delta: number > 0 = 0.5
  hmc                    delta = 0.2, n = 10, mass: [number > 0, ...] (diagonal, optional)
  relativistic_hmc       delta = 0.2, n = 10, m = 1, c = 1
  rmhmc                  delta = 0.2, n = 5, metric: identity | one_plus_q2 = one_plus_q2
  surrogate_hmc          delta = 0.2, n = 10, surrogate_scale = 1, scheme: leapfrog | stormer_verlet

samplers (hilbert target only)
  pcn                    rho in (-1, 1] | delta >= 0 = 0.5 (rho = (4 - delta)/(4 + delta))
  inf_mala               delta > 0 = 0.5
  inf_hmc                delta = 0.5, n = 5, delta1 = delta/2, delta2 = delta,
                         aux: reference | geometric = reference, aux_scale = 1
  gen_langevin           delta > 0 = 0.5, surrogate_scale = 1

run
  n_steps: int, burn_in: int = 0, n_chains: int = 1, seed: int, q0: [number, ...] = 0

output
  directory: string (overridden by --output-dir; else $INVMH_OUTPUT_DIR; else ./invmh_out)
  thin: int = 1
)";
}

}  // namespace invmh::runner
