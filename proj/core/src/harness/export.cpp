#include "onepass/harness/export.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

namespace onepass::harness {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// JSON has no NaN; null stands in and reads back as NaN.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double read_number(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::string csv_number(double v) { return std::isfinite(v) ? fmt::format("{:.17g}", v) : "nan"; }

json stats_json(const SummaryStats& s) {
  return {{"mean", number(s.mean)},     {"mean_se", number(s.mean_se)}, {"median", number(s.median)},
          {"median_se", number(s.median_se)}, {"best", number(s.best)},       {"count", s.count},
          {"nan_count", s.nan_count}};
}

std::string pm(double v, double se) { return std::isfinite(v) ? fmt::format("{:.4g} ± {:.2g}", v, se) : "nan"; }

}  // namespace

json summary_json(const ExperimentResult& r) {
  json settings = json::object();
  for (const auto& s : r.settings) settings[std::string(setting_name(s.setting))] = stats_json(s.stats);
  return {{"master_seed", r.config.master_seed}, {"n_trials", r.config.n_trials}, {"settings", settings}};
}

json timing_json(const ExperimentResult& r) {
  json settings = json::object();
  for (const auto& s : r.settings) {
    settings[std::string(setting_name(s.setting))] = {{"mean_runtime_s", number(s.mean_runtime_s)},
                                                      {"median_runtime_s", number(s.median_runtime_s)}};
  }
  return {{"settings", settings}};
}

json records_json(const ExperimentResult& r) {
  json out = json::array();
  for (const auto& s : r.settings) {
    for (const auto& rec : s.runs) {
      json snaps = json::array();
      for (const auto& sn : rec.snapshots) {
        snaps.push_back({sn.step, number(sn.train_loss), number(sn.val_loss), number(sn.test_loss), number(sn.lr),
                         number(sn.wd), number(sn.momentum)});
      }
      out.push_back({{"setting", setting_name(rec.setting)},
                     {"trial_id", rec.trial_id},
                     {"seed", rec.seed},
                     {"init_lr", rec.init_lr},
                     {"init_wd", rec.init_wd},
                     {"init_momentum", rec.init_momentum},
                     {"lr_multiplier", rec.lr_multiplier},
                     {"final_train_loss", number(rec.final_train_loss)},
                     {"final_val_loss", number(rec.final_val_loss)},
                     {"final_test_loss", number(rec.final_test_loss)},
                     {"final_test_loss_raw", number(rec.final_test_loss_raw)},
                     {"wall_seconds", rec.wall_seconds},
                     {"status", status_name(rec.status)},
                     {"outlier", rec.outlier},
                     {"weight_steps", rec.weight_steps},
                     {"hyper_steps", rec.hyper_steps},
                     {"snapshots", snaps}});
    }
  }
  return out;
}

std::vector<SettingResult> records_from_json(const json& j, const ExperimentConfig& c) {
  std::vector<Setting> order;
  std::vector<std::vector<RunRecord>> grouped;
  for (const auto& e : j) {
    const auto s = parse_setting(e.at("setting").get<std::string>());
    if (!s) throw ExportError(fmt::format("unknown setting '{}'", e.at("setting").get<std::string>()));
    auto it = std::find(order.begin(), order.end(), *s);
    if (it == order.end()) {
      order.push_back(*s);
      grouped.emplace_back();
      it = order.end() - 1;
    }
    RunRecord r;
    r.setting = *s;
    r.trial_id = e.at("trial_id").get<std::size_t>();
    r.seed = e.at("seed").get<std::uint64_t>();
    r.init_lr = e.at("init_lr").get<double>();
    r.init_wd = e.at("init_wd").get<double>();
    r.init_momentum = e.at("init_momentum").get<double>();
    r.lr_multiplier = e.at("lr_multiplier").get<double>();
    r.final_train_loss = read_number(e.at("final_train_loss"));
    r.final_val_loss = read_number(e.at("final_val_loss"));
    r.final_test_loss = read_number(e.at("final_test_loss"));
    r.final_test_loss_raw = read_number(e.at("final_test_loss_raw"));
    r.wall_seconds = e.at("wall_seconds").get<double>();
    r.status = e.at("status").get<std::string>() == "ok" ? Status::ok : Status::diverged_nan;
    r.outlier = e.at("outlier").get<bool>();
    r.weight_steps = e.at("weight_steps").get<std::size_t>();
    r.hyper_steps = e.at("hyper_steps").get<std::size_t>();
    for (const auto& sn : e.at("snapshots")) {
      r.snapshots.push_back({sn.at(0).get<std::size_t>(), read_number(sn.at(1)), read_number(sn.at(2)),
                             read_number(sn.at(3)), read_number(sn.at(4)), read_number(sn.at(5)),
                             read_number(sn.at(6))});
    }
    grouped[it - order.begin()].push_back(std::move(r));
  }
  std::vector<SettingResult> out;
  for (std::size_t k = 0; k < order.size(); ++k) out.push_back(summarise(order[k], std::move(grouped[k]), c));
  return out;
}

std::string trajectory_csv(const RunRecord& r) {
  std::string out = "step,train_loss,val_loss,test_loss,lr,wd,momentum,status\n";
  for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
    const Snapshot& s = r.snapshots[k];
    // The status column carries the trial outcome on the last row only.
    const std::string_view status = k + 1 == r.snapshots.size() ? status_name(r.status) : status_name(Status::ok);
    out += fmt::format("{},{},{},{},{},{},{},{}\n", s.step, csv_number(s.train_loss), csv_number(s.val_loss),
                       csv_number(s.test_loss), csv_number(s.lr), csv_number(s.wd), csv_number(s.momentum), status);
  }
  return out;
}

std::string cdf_csv(const std::vector<SettingResult>& settings) {
  std::string out = "setting,value,fraction\n";
  for (const auto& s : settings) {
    for (const CdfPoint& pt : empirical_cdf(final_metrics(s.reported)))
      out += fmt::format("{},{},{}\n", setting_name(s.setting), csv_number(pt.value), csv_number(pt.fraction));
  }
  return out;
}

std::string grid_csv(const GridResult& g, const ExperimentConfig& c) {
  std::string out = "T,i,setting,median,median_se,mean,mean_se,best,nan_count\n";
  auto row = [&](std::size_t T, std::string i, Setting s, const SummaryStats& st) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", T, i, setting_name(s), csv_number(st.median),
                       csv_number(st.median_se), csv_number(st.mean), csv_number(st.mean_se), csv_number(st.best),
                       st.nan_count);
  };
  for (const auto& cell : g.cells) row(cell.T, std::to_string(cell.i), c.grid_setting, cell.stats);
  for (const auto& b : g.random) row(b.T, "", Setting::random, b.stats);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ExportError(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out.flush()) throw ExportError(fmt::format("cannot write {}", path.string()));
}

void export_experiment(const ExperimentResult& r, const fs::path& dir) {
  write_text(dir / "summary.json", summary_json(r).dump(2) + "\n");
  write_text(dir / "timing.json", timing_json(r).dump(2) + "\n");
  write_text(dir / "records.json", records_json(r).dump() + "\n");
  write_text(dir / "cdf.csv", cdf_csv(r.settings));
  write_text(dir / "config.txt", to_text(r.config));
  for (const auto& s : r.settings) {
    for (std::size_t k = 0; k < s.runs.size(); ++k) {
      write_text(dir / "trajectories" / fmt::format("{}_{:03}.csv", setting_name(s.setting), k),
                 trajectory_csv(s.runs[k]));
    }
  }
}

void export_grid(const GridResult& g, const ExperimentConfig& c, const fs::path& dir) {
  write_text(dir / "grid.csv", grid_csv(g, c));
  write_text(dir / "config.txt", to_text(c));
}

std::string format_table(const ExperimentResult& r) {
  std::string out = fmt::format("{:<20} {:>22} {:>22} {:>10} {:>5} {:>10}\n", "setting", "mean ± se", "median ± se",
                                "best", "nan", "time (s)");
  for (const auto& s : r.settings) {
    out += fmt::format("{:<20} {:>22} {:>22} {:>10.4g} {:>5} {:>10.2f}\n", setting_label(s.setting),
                       pm(s.stats.mean, s.stats.mean_se), pm(s.stats.median, s.stats.median_se), s.stats.best,
                       s.stats.nan_count, s.mean_runtime_s);
  }
  return out;
}

std::string format_grid(const GridResult& g) {
  std::string out = fmt::format("{:>4} {:>6} {:>22} {:>5}\n", "T", "i", "median ± se", "nan");
  for (const auto& c : g.cells)
    out += fmt::format("{:>4} {:>6} {:>22} {:>5}\n", c.T, c.i, pm(c.stats.median, c.stats.median_se), c.stats.nan_count);
  for (const auto& b : g.random)
    out += fmt::format("{:>4} {:>6} {:>22} {:>5}\n", b.T, "random", pm(b.stats.median, b.stats.median_se),
                       b.stats.nan_count);
  return out;
}

}  // namespace onepass::harness
