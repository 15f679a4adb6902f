#include "coxmix/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace coxmix::io {

namespace {

using nlohmann::json;

void ensure_dir(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
}

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + file.string());
  }
  return out;
}

std::string join_support(const std::vector<int>& support) {
  std::string out;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (i > 0) out += ';';
    out += std::to_string(support[i] + 1);  // 1-based in files
  }
  return out;
}

json theta_to_json(const Theta& theta) {
  json j;
  j["baseline_a"] = theta.baseline_a;
  j["baseline_b"] = theta.baseline_b;
  j["beta"] = std::vector<double>(theta.beta.begin(), theta.beta.end());
  j["alpha"] = theta.alpha;
  j["mu"] = {theta.mu(0), theta.mu(1), theta.mu(2)};
  j["gamma_sq"] = {theta.gamma_sq(0), theta.gamma_sq(1)};
  j["sigma_sq"] = theta.sigma_sq;
  return j;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

std::vector<std::vector<std::string>> read_csv(
    const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open: " + file.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw std::runtime_error("empty csv: " + file.string());
  return rows;
}

}  // namespace

std::string format_double(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

void write_dataset_bundle(const std::filesystem::path& dir,
                          const simulator::SimConfig& config,
                          const simulator::SimResult& result) {
  ensure_dir(dir);
  const Dataset& data = result.data;

  {
    auto out = open_out(dir / "longitudinal.csv");
    out << "id,time,y\n";
    for (int i = 0; i < data.n(); ++i) {
      for (int j = 0; j < data.n_obs(); ++j) {
        out << (i + 1) << ',' << format_double(data.obs_times(j)) << ','
            << format_double(data.y(i, j)) << '\n';
      }
    }
  }
  {
    auto out = open_out(dir / "survival.csv");
    out << "id,time\n";
    for (int i = 0; i < data.n(); ++i) {
      out << (i + 1) << ',' << format_double(data.survival(i)) << '\n';
    }
  }
  {
    auto out = open_out(dir / "covariates.csv");
    out << "id";
    for (int k = 0; k < data.n_cov(); ++k) out << ",u" << (k + 1);
    out << '\n';
    for (int i = 0; i < data.n(); ++i) {
      out << (i + 1);
      for (int k = 0; k < data.n_cov(); ++k) {
        out << ',' << format_double(data.covariates(i, k));
      }
      out << '\n';
    }
  }
  {
    json meta;
    meta["command"] = "simulate";
    meta["seed"] = config.seed;
    meta["n"] = config.n;
    meta["n_obs"] = config.n_obs;
    meta["n_cov"] = config.n_cov;
    meta["t_start"] = config.t_start;
    meta["t_end"] = config.t_end;
    meta["cov_low"] = config.cov_low;
    meta["cov_high"] = config.cov_high;
    meta["quadrature_order"] = config.quadrature_order;
    meta["obs_times"] = std::vector<double>(data.obs_times.begin(),
                                            data.obs_times.end());
    meta["true_theta"] = theta_to_json(config.theta_true);
    json latents = json::array();
    for (const auto& z : result.latents) {
      latents.push_back({z.z1, z.z2, z.z3});
    }
    meta["true_latents"] = latents;
    meta["survival_uniform_draws"] = std::vector<double>(
        result.uniform_draws.begin(), result.uniform_draws.end());
    auto out = open_out(dir / "meta.json");
    out << meta.dump(2) << '\n';
  }
}

Dataset read_dataset_bundle(const std::filesystem::path& dir) {
  Dataset data;

  const auto longitudinal = read_csv(dir / "longitudinal.csv");
  const auto survival = read_csv(dir / "survival.csv");
  const auto covariates = read_csv(dir / "covariates.csv");

  // survival.csv fixes the individual count and ordering.
  const int n = static_cast<int>(survival.size()) - 1;
  if (n < 1) throw std::runtime_error("survival.csv has no rows");
  data.survival.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto& row = survival[i + 1];
    if (row.size() != 2) throw std::runtime_error("survival.csv: bad row");
    if (std::stoi(row[0]) != i + 1) {
      throw std::runtime_error("survival.csv: ids must be 1..N in order");
    }
    data.survival(i) = std::stod(row[1]);
  }

  // Long-format longitudinal observations on a shared grid.
  std::map<int, std::vector<std::pair<double, double>>> per_individual;
  for (std::size_t r = 1; r < longitudinal.size(); ++r) {
    const auto& row = longitudinal[r];
    if (row.size() != 3) throw std::runtime_error("longitudinal.csv: bad row");
    per_individual[std::stoi(row[0])].push_back(
        {std::stod(row[1]), std::stod(row[2])});
  }
  if (static_cast<int>(per_individual.size()) != n) {
    throw std::runtime_error(
        "longitudinal.csv individual count does not match survival.csv");
  }
  const auto& first = per_individual.begin()->second;
  const int j_count = static_cast<int>(first.size());
  data.obs_times.resize(j_count);
  for (int j = 0; j < j_count; ++j) data.obs_times(j) = first[j].first;
  data.y.resize(n, j_count);
  for (int i = 0; i < n; ++i) {
    auto it = per_individual.find(i + 1);
    if (it == per_individual.end() ||
        static_cast<int>(it->second.size()) != j_count) {
      throw std::runtime_error(
          "longitudinal.csv: every individual needs the shared grid");
    }
    for (int j = 0; j < j_count; ++j) {
      if (it->second[j].first != data.obs_times(j)) {
        throw std::runtime_error(
            "longitudinal.csv: observation grids differ between individuals");
      }
      data.y(i, j) = it->second[j].second;
    }
  }

  const int p = static_cast<int>(covariates[0].size()) - 1;
  data.covariates.resize(n, p);
  if (static_cast<int>(covariates.size()) - 1 != n) {
    throw std::runtime_error(
        "covariates.csv individual count does not match survival.csv");
  }
  for (int i = 0; i < n; ++i) {
    const auto& row = covariates[i + 1];
    if (static_cast<int>(row.size()) != p + 1) {
      throw std::runtime_error("covariates.csv: ragged row");
    }
    for (int k = 0; k < p; ++k) data.covariates(i, k) = std::stod(row[k + 1]);
  }

  data.validate();
  return data;
}

void write_estimate_csv(const std::filesystem::path& file,
                        const Theta& theta) {
  auto out = open_out(file);
  out << "parameter,value\n";
  for (int k = 0; k < theta.n_cov(); ++k) {
    out << "beta_" << (k + 1) << ',' << format_double(theta.beta(k)) << '\n';
  }
  out << "alpha," << format_double(theta.alpha) << '\n';
  for (int k = 0; k < 3; ++k) {
    out << "mu_" << (k + 1) << ',' << format_double(theta.mu(k)) << '\n';
  }
  for (int k = 0; k < 2; ++k) {
    out << "gamma_sq_" << (k + 1) << ',' << format_double(theta.gamma_sq(k))
        << '\n';
  }
  out << "sigma_sq," << format_double(theta.sigma_sq) << '\n';
}

void write_trace_csv(const std::filesystem::path& file,
                     const optimizer::FitTrace& trace, int p) {
  auto out = open_out(file);
  out << "k,gamma";
  for (const auto& name : ParamLayout::coordinate_names(p)) out << ',' << name;
  out << ",grad_norm,accept_rate,active_set,precond_fallback\n";
  for (const auto& rec : trace.records) {
    out << rec.k << ',' << format_double(rec.gamma);
    for (int c = 0; c < rec.theta.size(); ++c) {
      out << ',' << format_double(rec.theta(c));
    }
    out << ',' << format_double(rec.grad_norm) << ','
        << format_double(rec.accept_rate) << ',' << rec.active_set << ','
        << (rec.precond_fallback ? 1 : 0) << '\n';
  }
}

void write_path_csv(const std::filesystem::path& file,
                    const pipeline::SelectionPath& path, int p) {
  auto out = open_out(file);
  out << "lambda,ok,log_marginal,mc_se,active_count,bic,support";
  for (const auto& name : ParamLayout::coordinate_names(p)) out << ',' << name;
  out << '\n';
  for (const auto& entry : path) {
    out << format_double(entry.lambda) << ',' << (entry.ok ? 1 : 0);
    if (entry.ok) {
      out << ',' << format_double(entry.bic.log_marginal) << ','
          << format_double(entry.bic.mc_se) << ',' << entry.bic.active_count
          << ',' << format_double(entry.bic.bic) << ','
          << join_support(entry.support);
      for (int c = 0; c < entry.theta_hat.size(); ++c) {
        out << ',' << format_double(entry.theta_hat(c));
      }
    } else {
      out << ",,,,," << entry.error;
      for (int c = 0; c < p + 7; ++c) out << ',';
    }
    out << '\n';
  }
}

void write_study_report(const std::filesystem::path& dir,
                        const pipeline::StudyReport& report) {
  ensure_dir(dir);
  {
    auto out = open_out(dir / "report.csv");
    out << "parameter,true_value,mean_estimate,rel_rmse\n";
    for (const auto& row : report.params) {
      out << row.name << ',' << format_double(row.true_value) << ','
          << format_double(row.mean_estimate) << ','
          << format_double(row.rel_rmse) << '\n';
    }
  }
  {
    auto out = open_out(dir / "beta_report.csv");
    out << "coordinate,true_value,selection_frequency,mean_refit_estimate,"
           "mean_lasso_estimate\n";
    for (int k = 0; k < report.beta_true.size(); ++k) {
      out << (k + 1) << ',' << format_double(report.beta_true(k)) << ','
          << format_double(report.beta_selection_freq(k)) << ','
          << format_double(report.beta_mean_refit(k)) << ','
          << format_double(report.beta_mean_lasso(k)) << '\n';
    }
  }
  {
    const int p = static_cast<int>(report.beta_true.size());
    auto out = open_out(dir / "runs.csv");
    out << "run,seed,ok,lambda,bic,support,alpha,gamma_sq_1,gamma_sq_2,mu_1,"
           "mu_2,mu_3,sigma_sq";
    for (int k = 0; k < p; ++k) out << ",beta_refit_" << (k + 1);
    for (int k = 0; k < p; ++k) out << ",beta_lasso_" << (k + 1);
    out << ",error\n";
    for (const auto& run : report.runs) {
      out << run.run << ',' << run.seed << ',' << (run.ok ? 1 : 0);
      if (run.ok) {
        const Theta& est = run.estimate;
        out << ',' << format_double(run.lambda_m) << ','
            << format_double(run.bic) << ',' << join_support(run.support)
            << ',' << format_double(est.alpha) << ','
            << format_double(est.gamma_sq(0)) << ','
            << format_double(est.gamma_sq(1)) << ','
            << format_double(est.mu(0)) << ',' << format_double(est.mu(1))
            << ',' << format_double(est.mu(2)) << ','
            << format_double(est.sigma_sq);
        for (int k = 0; k < p; ++k) {
          out << ',' << format_double(est.beta(k));
        }
        for (int k = 0; k < p; ++k) {
          out << ',' << format_double(run.beta_lasso(k));
        }
        out << ',';
      } else {
        for (int c = 0; c < 2 * p + 10; ++c) out << ',';
        out << run.error;
      }
      out << '\n';
    }
  }
}

void write_text_summary(const std::filesystem::path& file,
                        const pipeline::StudyReport& report) {
  auto out = open_out(file);
  const int total = static_cast<int>(report.runs.size());
  out << "replicates: " << total << " (" << report.failed_runs
      << " failed)\n\n";
  out << "parameter      true        mean        rel RMSE\n";
  char line[160];
  for (const auto& row : report.params) {
    std::snprintf(line, sizeof(line), "%-12s %11.5g %11.5g %11.4g\n",
                  row.name.c_str(), row.true_value, row.mean_estimate,
                  row.rel_rmse);
    out << line;
  }
  out << "\nselected beta coordinates (frequency > 0):\n";
  for (int k = 0; k < report.beta_true.size(); ++k) {
    if (report.beta_selection_freq(k) > 0.0) {
      std::snprintf(line, sizeof(line),
                    "  beta_%-4d freq %5.2f  true %8.4g  refit mean %8.4g\n",
                    k + 1, report.beta_selection_freq(k), report.beta_true(k),
                    report.beta_mean_refit(k));
      out << line;
    }
  }
}

}  // namespace coxmix::io
