// File contracts: dataset CSV bundle, trace/path/report writers, and the
// resolved-config echo. All floating-point output uses 17 significant
// digits so round trips are lossless.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "coxmix/pipeline.hpp"
#include "coxmix/simulator.hpp"
#include "coxmix/types.hpp"

namespace coxmix::io {

std::string format_double(double v);

// Dataset bundle under `dir`:
//   longitudinal.csv  id,time,y            (long format)
//   survival.csv      id,time
//   covariates.csv    id,u1..up
//   meta.json         config echo, seed, true theta/latents, survival draws
void write_dataset_bundle(const std::filesystem::path& dir,
                          const simulator::SimConfig& config,
                          const simulator::SimResult& result);

Dataset read_dataset_bundle(const std::filesystem::path& dir);

void write_estimate_csv(const std::filesystem::path& file, const Theta& theta);

// One row per iteration: k, gamma, all theta coordinates, ||v_k||,
// acceptance rate, active-set size, preconditioner fallback flag.
void write_trace_csv(const std::filesystem::path& file,
                     const optimizer::FitTrace& trace, int p);

void write_path_csv(const std::filesystem::path& file,
                    const pipeline::SelectionPath& path, int p);

// report.csv (Table-2 row set), beta_report.csv (per-coordinate selection
// frequencies and estimates), runs.csv (per-run seeds, supports, and
// estimates; the aggregate report is recomputable from it).
void write_study_report(const std::filesystem::path& dir,
                        const pipeline::StudyReport& report);

void write_text_summary(const std::filesystem::path& file,
                        const pipeline::StudyReport& report);

}  // namespace coxmix::io
