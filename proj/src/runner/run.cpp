#include "invmh/errors.hpp"
#include "invmh/runner.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <thread>

namespace invmh::runner {

namespace {

std::seed_seq seeds_for(std::uint64_t seed, int chain, std::uint32_t purpose) {
  return std::seed_seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                       static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(chain),
                       purpose};
}

/// Shortest round-trip decimal form; identical across runs and platforms
/// that share the double format.
void append_number(std::string& line, double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  line.append(buf, res.ptr);
}

Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(number_or_null(v[i]));
  return a;
}

struct ChainOutput {
  Eigen::MatrixXd kept;
  double acceptance_rate = 0.0;
  std::size_t steps_done = 0;
  std::string error;
};

ChainOutput run_one_chain(const Experiment& ex, const ExperimentConfig& cfg, int c,
                          const std::filesystem::path& csv_path) {
  ChainOutput out;
  const Index d = ex.q0.size();
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) {
    out.error = "cannot write " + csv_path.string();
    return out;
  }
  std::string line = "step";
  for (Index i = 0; i < d; ++i) line += ",q_" + std::to_string(i + 1);
  line += ",alpha,accepted\n";
  csv << line;

  const std::size_t n = cfg.run.n_steps, burn = cfg.run.burn_in, thin = cfg.output.thin;
  const std::size_t kept_rows = (n - burn) / thin;
  std::vector<double> kept;
  kept.reserve(kept_rows * static_cast<std::size_t>(d));

  Rng rng = chain_rng(cfg.run.seed, c);
  Eigen::VectorXd q = ex.q0;
  std::size_t accepted = 0, counted = 0;
  try {
    for (std::size_t k = 1; k <= n; ++k) {
      StepResult<double> r = mh_step(*ex.kernel, q, rng);
      q = std::move(r.next);
      out.steps_done = k;
      if (k <= burn) continue;
      ++counted;
      accepted += r.accepted ? 1 : 0;
      if ((k - burn) % thin != 0) continue;
      line.clear();
      line += std::to_string(k);
      for (Index i = 0; i < d; ++i) {
        line += ',';
        append_number(line, q[i]);
      }
      line += ',';
      append_number(line, r.alpha);
      line += r.accepted ? ",1\n" : ",0\n";
      csv << line;
      kept.insert(kept.end(), q.data(), q.data() + d);
    }
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.acceptance_rate = counted ? static_cast<double>(accepted) / static_cast<double>(counted) : 0.0;
  const Index rows = static_cast<Index>(kept.size()) / std::max<Index>(d, 1);
  out.kept = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      kept.data(), rows, d);
  return out;
}

void write_json(const std::filesystem::path& p, const Json& j) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << j.dump(2) << '\n';
}

}  // namespace

Rng chain_rng(std::uint64_t seed, int chain) {
  auto ss = seeds_for(seed, chain, 0);
  return Rng(ss);
}

Json to_json(const ChainSummary& s) {
  Json j;
  j["acceptance_rate"] = s.acceptance_rate;
  j["n_samples"] = s.n_samples;
  j["mean"] = vector_json(s.mean);
  j["mean_se"] = vector_json(s.mean_se);
  j["variance"] = vector_json(s.variance);
  j["variance_se"] = vector_json(s.variance_se);
  Json e = Json::array();
  for (double x : s.ess) e.push_back(number_or_null(x));
  j["ess"] = e;
  j["ess_observables"] = "coordinates then squared norm";
  j["ess_degenerate"] = s.ess_degenerate;
  j["db_pvalue_first"] = s.db_pvalue_first ? Json(*s.db_pvalue_first) : Json(nullptr);
  j["db_pvalue_sqnorm"] = s.db_pvalue_sqnorm ? Json(*s.db_pvalue_sqnorm) : Json(nullptr);
  return j;
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg, const RunOverrides& ov) {
  if (ov.output_dir) return *ov.output_dir;
  if (cfg.output.directory) return *cfg.output.directory;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return kDefaultOutputDir;
}

RunResult run_experiment(ExperimentConfig cfg, const RunOverrides& ov, std::ostream& log) {
  if (ov.seed) cfg.run.seed = *ov.seed;
  if (ov.chains) {
    if (*ov.chains < 1 || *ov.chains > 256) throw ConfigError("--chains: must lie in [1, 256]");
    cfg.run.n_chains = *ov.chains;
  }
  RunResult result;
  result.output_dir = resolve_output_dir(cfg, ov);
  cfg.output.directory = result.output_dir.string();
  const Experiment ex = build_experiment(cfg);

  std::error_code ec;
  std::filesystem::create_directories(result.output_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + result.output_dir.string() + ": " + ec.message());

  const int chains = cfg.run.n_chains;
  std::vector<ChainOutput> outputs(static_cast<std::size_t>(chains));
  {
    std::vector<std::thread> workers;
    for (int c = 0; c < chains; ++c) {
      workers.emplace_back([&, c] {
        outputs[static_cast<std::size_t>(c)] =
            run_one_chain(ex, cfg, c, result.output_dir / ("chain_" + std::to_string(c) + ".csv"));
      });
    }
    for (auto& w : workers) w.join();
  }

  Json chains_json = Json::array();
  Json errors = Json::array();
  for (int c = 0; c < chains; ++c) {
    const ChainOutput& o = outputs[static_cast<std::size_t>(c)];
    auto ss = seeds_for(cfg.run.seed, c, 1);
    Rng db_rng(ss);
    ChainSummary s = summarize(o.kept, o.acceptance_rate, db_rng);
    Json cj;
    cj["chain"] = c;
    cj["csv"] = "chain_" + std::to_string(c) + ".csv";
    cj["steps_completed"] = o.steps_done;
    cj["summary"] = to_json(s);
    if (!o.error.empty()) {
      cj["error"] = o.error;
      errors.push_back({{"chain", c}, {"steps_completed", o.steps_done}, {"message", o.error}});
      log << "chain " << c << ": failed after " << o.steps_done << " steps: " << o.error << '\n';
    } else {
      log << "chain " << c << ": acceptance " << s.acceptance_rate << ", " << s.n_samples
          << " samples\n";
    }
    chains_json.push_back(std::move(cj));
    result.summaries.push_back(std::move(s));
  }

  Json summary;
  summary["library_version"] = kLibraryVersion;
  summary["status"] = errors.empty() ? "ok" : "error";
  summary["config"] = cfg.to_json();
  summary["chains"] = std::move(chains_json);
  write_json(result.output_dir / "summary.json", summary);
  if (!errors.empty()) {
    write_json(result.output_dir / "error.json", Json{{"errors", errors}});
    result.exit_code = kRuntimeError;
    result.error = errors[0]["message"].get<std::string>();
  }
  return result;
}

int run_command(const std::filesystem::path& config_path, const RunOverrides& ov,
                std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  try {
    RunResult r = run_experiment(std::move(cfg), ov, out);
    if (r.exit_code != kOk) {
      err << "runtime error: " << r.error << " (see " << (r.output_dir / "error.json").string() << ")\n";
      return r.exit_code;
    }
    out << "wrote " << r.output_dir.string() << '\n';
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace invmh::runner
