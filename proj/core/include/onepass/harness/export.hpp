#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "onepass/harness/experiment.hpp"

namespace onepass::harness {

class ExportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-setting statistics only; runtimes live in timing_json so this is
/// reproducible bit for bit.
nlohmann::json summary_json(const ExperimentResult& r);
nlohmann::json timing_json(const ExperimentResult& r);
nlohmann::json records_json(const ExperimentResult& r);
/// Rebuilds records written by records_json.
std::vector<SettingResult> records_from_json(const nlohmann::json& j, const ExperimentConfig& c);

/// step,train_loss,val_loss,test_loss,lr,wd,momentum,status
std::string trajectory_csv(const RunRecord& r);
/// setting,value,fraction
std::string cdf_csv(const std::vector<SettingResult>& settings);
/// T,i,setting,median,median_se,mean,mean_se,best,nan_count
std::string grid_csv(const GridResult& g, const ExperimentConfig& c);

/// Writes summary.json, timing.json, records.json, cdf.csv, config.txt and
/// trajectories/<setting>_<trial>.csv under dir.
void export_experiment(const ExperimentResult& r, const std::filesystem::path& dir);
void export_grid(const GridResult& g, const ExperimentConfig& c, const std::filesystem::path& dir);

/// Throws ExportError when the file cannot be written.
void write_text(const std::filesystem::path& path, const std::string& text);

/// Table of mean ± se, median ± se and best per setting.
std::string format_table(const ExperimentResult& r);
std::string format_grid(const GridResult& g);

}  // namespace onepass::harness
