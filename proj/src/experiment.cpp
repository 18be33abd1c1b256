#include "isvae/experiment.hpp"

#include "isvae/clustering.hpp"
#include "isvae/spectral.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace isvae::experiment {

std::string to_string(ScaleMode mode) {
  switch (mode) {
    case ScaleMode::none: return "none";
    case ScaleMode::standard: return "standard";
    case ScaleMode::spectrum_rms: return "spectrum_rms";
  }
  return "?";
}

ScaleMode scale_mode_from_string(const std::string& s) {
  if (s == "none") return ScaleMode::none;
  if (s == "standard") return ScaleMode::standard;
  if (s == "spectrum_rms") return ScaleMode::spectrum_rms;
  throw ValidationError("unknown scale mode: " + s);
}

std::string to_string(FeatureSpace space) {
  switch (space) {
    case FeatureSpace::f0: return "f0";
    case FeatureSpace::f0_extended: return "f0_extended";
    case FeatureSpace::latent_z: return "latent_z";
    case FeatureSpace::raw_time: return "raw_time";
    case FeatureSpace::raw_dct: return "raw_dct";
  }
  return "?";
}

FeatureSpace feature_space_from_string(const std::string& s) {
  if (s == "f0") return FeatureSpace::f0;
  if (s == "f0_extended") return FeatureSpace::f0_extended;
  if (s == "latent_z") return FeatureSpace::latent_z;
  if (s == "raw_time") return FeatureSpace::raw_time;
  if (s == "raw_dct") return FeatureSpace::raw_dct;
  throw ValidationError("unknown feature space: " + s);
}

nlohmann::json to_json(const ClustererSpec& spec) {
  return {
      {"method", spec.method}, {"name", spec.name},       {"k", spec.k},
      {"eps", spec.eps},       {"min_pts", spec.min_pts}, {"gamma", spec.gamma},
      {"n_init", spec.n_init}, {"max_iter", spec.max_iter},
  };
}

ClustererSpec clusterer_spec_from_json(const nlohmann::json& j) {
  ClustererSpec spec;
  spec.method = j.value("method", spec.method);
  spec.name = j.value("name", spec.name);
  spec.k = j.value("k", spec.k);
  spec.eps = j.value("eps", spec.eps);
  spec.min_pts = j.value("min_pts", spec.min_pts);
  spec.gamma = j.value("gamma", spec.gamma);
  spec.n_init = j.value("n_init", spec.n_init);
  spec.max_iter = j.value("max_iter", spec.max_iter);
  return spec;
}

void ExperimentConfig::validate() const {
  if (synthetic.has_value() == !csv_path.empty())
    throw ValidationError("ExperimentConfig: set exactly one of synthetic or csv_path");
  if (n_realizations < 1) throw ValidationError("ExperimentConfig: n_realizations must be >= 1");
  if (baseline_realizations < 1)
    throw ValidationError("ExperimentConfig: baseline_realizations must be >= 1");
  if (clusterers.empty()) throw ValidationError("ExperimentConfig: clusterer grid is empty");
  const bool any_model = include_vanilla_vae || (!decoders.empty() && !j_values.empty());
  if (!any_model && !include_baselines)
    throw ValidationError("ExperimentConfig: nothing to run");
  if (output_dir.empty()) throw ValidationError("ExperimentConfig: output_dir is empty");
  for (const auto& c : clusterers) {
    if (c.method != "kmeans" && c.method != "dbscan" && c.method != "spectral")
      throw ValidationError("ExperimentConfig: unknown clusterer method " + c.method);
    int dup = 0;
    for (const auto& o : clusterers)
      if (o.id() == c.id()) ++dup;
    if (dup > 1) throw ValidationError("ExperimentConfig: duplicate clusterer id " + c.id() +
                                       " (set distinct names)");
  }
  for (FeatureSpace s : feature_spaces)
    if (s == FeatureSpace::raw_time || s == FeatureSpace::raw_dct)
      throw ValidationError("ExperimentConfig: raw spaces are controlled by include_baselines");
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  if (cfg.synthetic) j["synthetic"] = datagen::to_json(*cfg.synthetic);
  if (!cfg.csv_path.empty()) j["csv_path"] = cfg.csv_path;
  j["dataset_name"] = cfg.dataset_name;
  j["split"] = datagen::to_json(cfg.split);
  j["scale"] = to_string(cfg.scale);
  nlohmann::json grid;
  grid["j_values"] = cfg.j_values;
  grid["sigma"] = cfg.sigma;
  grid["K"] = cfg.latent_k;
  std::vector<std::string> dec;
  for (auto d : cfg.decoders) dec.push_back(isvae::to_string(d));
  grid["decoders"] = dec;
  grid["attention_hidden"] = cfg.attention_hidden;
  grid["encoder_hidden"] = cfg.encoder_hidden;
  grid["decoder_hidden"] = cfg.decoder_hidden;
  grid["vae_encoder_hidden"] = cfg.vae_encoder_hidden;
  grid["cnn_channels"] = cfg.cnn_channels;
  grid["cnn_kernel"] = cfg.cnn_kernel;
  grid["nu"] = cfg.nu;
  j["model_grid"] = grid;
  j["train"] = training::to_json(cfg.train);
  nlohmann::json cl = nlohmann::json::array();
  for (const auto& c : cfg.clusterers) cl.push_back(to_json(c));
  j["clusterers"] = cl;
  std::vector<std::string> spaces;
  for (auto s : cfg.feature_spaces) spaces.push_back(to_string(s));
  j["feature_spaces"] = spaces;
  j["include_baselines"] = cfg.include_baselines;
  j["include_vanilla_vae"] = cfg.include_vanilla_vae;
  j["n_realizations"] = cfg.n_realizations;
  j["baseline_realizations"] = cfg.baseline_realizations;
  j["base_seed"] = cfg.base_seed;
  j["output_dir"] = cfg.output_dir;
  j["max_workers"] = cfg.max_workers;
  j["z_mean"] = cfg.z_mean;
  return j;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  if (j.contains("synthetic")) cfg.synthetic = datagen::synthetic_spec_from_json(j.at("synthetic"));
  cfg.csv_path = j.value("csv_path", cfg.csv_path);
  cfg.dataset_name = j.value("dataset_name", cfg.dataset_name);
  if (j.contains("split")) cfg.split = datagen::split_spec_from_json(j.at("split"));
  if (j.contains("scale")) {
    const auto& s = j.at("scale");
    if (s.is_boolean())
      cfg.scale = s.get<bool>() ? ScaleMode::standard : ScaleMode::none;
    else
      cfg.scale = scale_mode_from_string(s.get<std::string>());
  }
  if (j.contains("model_grid")) {
    const auto& grid = j.at("model_grid");
    if (grid.contains("j_values")) cfg.j_values = grid.at("j_values").get<std::vector<int>>();
    cfg.sigma = grid.value("sigma", cfg.sigma);
    cfg.latent_k = grid.value("K", cfg.latent_k);
    if (grid.contains("decoders")) {
      cfg.decoders.clear();
      for (const auto& d : grid.at("decoders"))
        cfg.decoders.push_back(decoder_kind_from_string(d.get<std::string>()));
    }
    if (grid.contains("attention_hidden"))
      cfg.attention_hidden = grid.at("attention_hidden").get<std::vector<int>>();
    if (grid.contains("encoder_hidden"))
      cfg.encoder_hidden = grid.at("encoder_hidden").get<std::vector<int>>();
    if (grid.contains("decoder_hidden"))
      cfg.decoder_hidden = grid.at("decoder_hidden").get<std::vector<int>>();
    if (grid.contains("vae_encoder_hidden"))
      cfg.vae_encoder_hidden = grid.at("vae_encoder_hidden").get<std::vector<int>>();
    cfg.cnn_channels = grid.value("cnn_channels", cfg.cnn_channels);
    cfg.cnn_kernel = grid.value("cnn_kernel", cfg.cnn_kernel);
    cfg.nu = grid.value("nu", cfg.nu);
  }
  if (j.contains("train")) cfg.train = training::train_config_from_json(j.at("train"));
  if (j.contains("clusterers")) {
    cfg.clusterers.clear();
    for (const auto& c : j.at("clusterers")) cfg.clusterers.push_back(clusterer_spec_from_json(c));
  }
  if (j.contains("feature_spaces")) {
    cfg.feature_spaces.clear();
    for (const auto& s : j.at("feature_spaces"))
      cfg.feature_spaces.push_back(feature_space_from_string(s.get<std::string>()));
  }
  cfg.include_baselines = j.value("include_baselines", cfg.include_baselines);
  cfg.include_vanilla_vae = j.value("include_vanilla_vae", cfg.include_vanilla_vae);
  cfg.n_realizations = j.value("n_realizations", cfg.n_realizations);
  cfg.baseline_realizations = j.value("baseline_realizations", cfg.baseline_realizations);
  cfg.base_seed = j.value("base_seed", cfg.base_seed);
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  cfg.max_workers = j.value("max_workers", cfg.max_workers);
  cfg.z_mean = j.value("z_mean", cfg.z_mean);
  return cfg;
}

// ---------------------------------------------------------------------------
// Realization pipeline
// ---------------------------------------------------------------------------

namespace {

struct MetricsRow {
  std::string variant;
  int j = -1;
  std::string feature_space;
  std::string clusterer;
  metrics::MetricReport report;
};

struct RealizationOutput {
  std::vector<MetricsRow> rows;
};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_feature_csv(const std::string& path, const Mat& features, const std::string& stem) {
  std::ofstream out(path);
  if (!out) throw TrainingError("cannot open " + path);
  for (int c = 0; c < features.cols(); ++c) out << (c ? "," : "") << stem << "_" << (c + 1);
  out << "\n";
  for (int r = 0; r < features.rows(); ++r) {
    for (int c = 0; c < features.cols(); ++c)
      out << (c ? "," : "") << format_double(features(r, c));
    out << "\n";
  }
}

void write_assignment_csv(const std::string& path, const VecI& labels) {
  std::ofstream out(path);
  if (!out) throw TrainingError("cannot open " + path);
  out << "index,label\n";
  for (int i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << "\n";
}

void write_label_csv(const std::string& path, const VecI& labels) {
  std::ofstream out(path);
  if (!out) throw TrainingError("cannot open " + path);
  out << "label\n";
  for (int i = 0; i < labels.size(); ++i) out << labels[i] << "\n";
}

VecI run_clusterer(const ClustererSpec& spec, const Mat& features, int default_k,
                   std::uint64_t seed) {
  const int k = spec.k > 0 ? spec.k : default_k;
  if (spec.method == "kmeans")
    return clustering::kmeans(features, k, seed, spec.n_init, spec.max_iter).labels;
  if (spec.method == "dbscan") return clustering::dbscan(features, spec.eps, spec.min_pts);
  return clustering::spectral_cluster(features, k, seed, spec.gamma);
}

// Scores one feature matrix against the clusterer grid, appending result rows
// and assignment files.
void score_features(const ExperimentConfig& cfg, const std::string& variant, int j,
                    const std::string& space_name, const Mat& features, const VecI& truth,
                    int default_k, std::uint64_t seed_r, const fs::path& dir,
                    std::vector<MetricsRow>& rows) {
  for (size_t ci = 0; ci < cfg.clusterers.size(); ++ci) {
    const auto& spec = cfg.clusterers[ci];
    VecI pred = run_clusterer(spec, features, default_k,
                              derive_seed(seed_r, 31 + static_cast<std::uint64_t>(ci)));
    write_assignment_csv((dir / ("assignments_" + space_name + "_" + spec.id() + ".csv")).string(),
                         pred);
    MetricsRow row;
    row.variant = variant;
    row.j = j;
    row.feature_space = space_name;
    row.clusterer = spec.id();
    row.report = metrics::evaluate(features, truth, pred);
    rows.push_back(std::move(row));
  }
}

ModelConfig build_model_config(const ExperimentConfig& cfg, int d, int j, DecoderKind kind) {
  ModelConfig mc = make_default_config(d, j, cfg.sigma, cfg.latent_k, kind);
  if (!cfg.attention_hidden.empty()) mc.attention_hidden = cfg.attention_hidden;
  if (!cfg.encoder_hidden.empty()) mc.encoder_hidden = cfg.encoder_hidden;
  if (!cfg.decoder_hidden.empty()) mc.decoder_hidden = cfg.decoder_hidden;
  if (!cfg.vae_encoder_hidden.empty()) mc.vae_encoder_hidden = cfg.vae_encoder_hidden;
  mc.cnn_channels = cfg.cnn_channels;
  mc.cnn_kernel = cfg.cnn_kernel;
  mc.nu = cfg.nu;
  return mc;
}

RealizationOutput run_realization(const ExperimentConfig& cfg, const Dataset& data, int r,
                                  int n_classes) {
  const std::uint64_t seed_r = cfg.base_seed + static_cast<std::uint64_t>(r);
  const bool do_models = r < cfg.n_realizations;
  const bool do_baselines = cfg.include_baselines && r < cfg.baseline_realizations;

  char dirname[32];
  std::snprintf(dirname, sizeof(dirname), "realization_%03d", r);
  const fs::path dir = fs::path(cfg.output_dir) / dirname;
  fs::create_directories(dir);

  datagen::SplitSpec split_spec = cfg.split;
  split_spec.seed = seed_r;
  datagen::Split parts = datagen::split(data, split_spec);

  nlohmann::json preprocess;
  preprocess["split_seed"] = seed_r;
  preprocess["train_idx"] = parts.train_idx;
  preprocess["val_idx"] = parts.val_idx;
  preprocess["test_idx"] = parts.test_idx;

  Dataset train_t = parts.train, val_t = parts.val, test_t = parts.test;
  if (cfg.scale == ScaleMode::standard) {
    datagen::Scaled scaled = datagen::standard_scale(parts.train, {parts.val, parts.test});
    train_t = std::move(scaled.train);
    val_t = std::move(scaled.others[0]);
    test_t = std::move(scaled.others[1]);
    preprocess["scaler_mean"] = std::vector<double>(scaled.params.mean.data(),
                                                    scaled.params.mean.data() + scaled.params.mean.size());
    preprocess["scaler_std"] = std::vector<double>(
        scaled.params.stddev.data(), scaled.params.stddev.data() + scaled.params.stddev.size());
  }

  Dataset train_s = datagen::to_spectrum(train_t);
  Dataset val_s = datagen::to_spectrum(val_t);
  Dataset test_s = datagen::to_spectrum(test_t);
  if (cfg.scale == ScaleMode::spectrum_rms) {
    const double denom = datagen::global_rms(train_s.signals);
    train_s.signals /= denom;
    val_s.signals /= denom;
    test_s.signals /= denom;
    preprocess["spectrum_rms"] = denom;
  }

  {
    const Vec p_x = spectral::mean_periodogram(train_s.signals);
    preprocess["train_periodogram"] = std::vector<double>(p_x.data(), p_x.data() + p_x.size());
    std::ofstream out(dir / "preprocess.json");
    out << preprocess.dump();
  }
  write_label_csv((dir / "test_labels.csv").string(), *test_s.labels);

  RealizationOutput out;
  const VecI& truth = *test_s.labels;

  if (do_baselines) {
    score_features(cfg, "time", -1, "raw_time", test_t.signals, truth, n_classes, seed_r, dir,
                   out.rows);
    score_features(cfg, "dct", -1, "raw_dct", test_s.signals, truth, n_classes, seed_r, dir,
                   out.rows);
  }

  if (do_models) {
    if (cfg.include_vanilla_vae) {
      ModelConfig mc = build_model_config(cfg, data.dim(), 1, DecoderKind::vanilla);
      training::TrainConfig tc = cfg.train;
      tc.seed = seed_r;
      training::TrainResult tr = training::train_vanilla_vae(mc, tc, train_s, &val_s);
      const fs::path vdir = dir / "vanilla_vae";
      fs::create_directories(vdir);
      tr.trace.save_csv((vdir / "trace.csv").string());
      Mat z = training::extract_vae_latent(tr.best_checkpoint, test_s, derive_seed(seed_r, 21),
                                           cfg.z_mean);
      write_feature_csv((vdir / "features_latent_z.csv").string(), z, "z");
      score_features(cfg, "vanilla_vae", -1, "latent_z", z, truth, n_classes, seed_r, vdir,
                     out.rows);
    }

    for (DecoderKind kind : cfg.decoders) {
      for (int jv : cfg.j_values) {
        ModelConfig mc = build_model_config(cfg, data.dim(), jv, kind);
        training::TrainConfig tc = cfg.train;
        tc.seed = seed_r;
        training::TrainResult tr = training::train(mc, tc, train_s, &val_s);

        const std::string variant = std::string("isvae_") + isvae::to_string(kind);
        const fs::path vdir = dir / (variant + "_J" + std::to_string(jv));
        fs::create_directories(vdir);
        tr.trace.save_csv((vdir / "trace.csv").string());
        if (!tr.trace.class_values.empty())
          tr.trace.save_class_csv((vdir / "trace_classes.csv").string());

        training::FeatureSet feats =
            training::extract_features(tr.best_checkpoint, test_s, derive_seed(seed_r, 21),
                                       cfg.z_mean);
        for (FeatureSpace space : cfg.feature_spaces) {
          const Mat& features = space == FeatureSpace::f0 ? feats.f0
                                : space == FeatureSpace::f0_extended ? feats.extended
                                                                     : feats.z;
          const std::string stem = space == FeatureSpace::latent_z ? "z" : "f";
          write_feature_csv((vdir / ("features_" + to_string(space) + ".csv")).string(), features,
                            stem);
          score_features(cfg, variant, jv, to_string(space), features, truth, n_classes, seed_r,
                         vdir, out.rows);
        }
      }
    }
  }

  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& row : out.rows)
    rows_json.push_back({{"variant", row.variant},
                         {"J", row.j},
                         {"feature_space", row.feature_space},
                         {"clusterer", row.clusterer},
                         {"metrics", metrics::to_json(row.report)}});
  std::ofstream mfile(dir / "metrics.json");
  mfile << rows_json.dump();
  return out;
}

struct Key {
  std::string variant;
  int j;
  std::string space;
  std::string clusterer;
  bool operator==(const Key&) const = default;
};

double nan_mean(const std::vector<double>& xs) {
  double sum = 0;
  int n = 0;
  for (double x : xs)
    if (std::isfinite(x)) {
      sum += x;
      ++n;
    }
  return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

double nan_std(const std::vector<double>& xs) {
  const double mu = nan_mean(xs);
  if (!std::isfinite(mu)) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0;
  int n = 0;
  for (double x : xs)
    if (std::isfinite(x)) {
      sum += (x - mu) * (x - mu);
      ++n;
    }
  return n > 1 ? std::sqrt(sum / (n - 1)) : 0.0;
}

}  // namespace

void ResultsTable::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw TrainingError("ResultsTable::save_csv: cannot open " + path);
  out << "variant,J,feature_space,clusterer,v_mean,v_std,h_mean,h_std,c_mean,c_std,"
         "sil_mean,sil_std,ch_mean,ch_std\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    out << ',' << buf;
  };
  for (const auto& r : rows) {
    out << r.variant << ',';
    if (r.j >= 0) out << r.j;
    else out << '-';
    out << ',' << r.feature_space << ',' << r.clusterer;
    put(r.v_mean);
    put(r.v_std);
    put(r.h_mean);
    put(r.h_std);
    put(r.c_mean);
    put(r.c_std);
    put(r.sil_mean);
    put(r.sil_std);
    put(r.ch_mean);
    put(r.ch_std);
    out << "\n";
  }
}

nlohmann::json ResultsTable::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows)
    arr.push_back({{"variant", r.variant},
                   {"J", r.j},
                   {"feature_space", r.feature_space},
                   {"clusterer", r.clusterer},
                   {"realizations", r.realizations},
                   {"v_mean", r.v_mean},
                   {"v_std", r.v_std},
                   {"h_mean", r.h_mean},
                   {"h_std", r.h_std},
                   {"c_mean", r.c_mean},
                   {"c_std", r.c_std},
                   {"sil_mean", r.sil_mean},
                   {"sil_std", r.sil_std},
                   {"ch_mean", r.ch_mean},
                   {"ch_std", r.ch_std}});
  return {{"rows", arr}, {"excluded_runs", excluded_runs}};
}

ResultsTable run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  cfg.train.validate();

  Dataset data = cfg.synthetic ? datagen::generate_synthetic(*cfg.synthetic)
                               : datagen::load_csv(cfg.csv_path, cfg.dataset_name);
  data.validate();
  if (!data.labeled())
    throw ValidationError("run_experiment: labels are required for model selection and scoring");
  const int n_classes = data.label_count();

  fs::create_directories(cfg.output_dir);
  {
    std::ofstream out(fs::path(cfg.output_dir) / "config.json");
    out << to_json(cfg).dump(2);
  }

  const bool any_model =
      cfg.include_vanilla_vae || (!cfg.decoders.empty() && !cfg.j_values.empty());
  int total = cfg.include_baselines ? cfg.baseline_realizations : 0;
  if (any_model) total = std::max(total, cfg.n_realizations);

  std::vector<std::optional<RealizationOutput>> outputs(total);
  std::vector<std::string> failures;
  std::mutex failures_mutex;
  std::atomic<int> next{0};

  int workers = cfg.max_workers > 0 ? cfg.max_workers
                                    : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, total));

  auto worker = [&]() {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= total) return;
      try {
        outputs[r] = run_realization(cfg, data, r, n_classes);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failures_mutex);
        failures.push_back("realization " + std::to_string(r) + ": " + e.what());
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (const auto& f : failures) std::cerr << "[warn] excluded " << f << "\n";

  // Aggregate in the deterministic row order implied by the grids.
  std::vector<Key> keys;
  auto add_keys = [&](const std::string& variant, int j, const std::string& space) {
    for (const auto& c : cfg.clusterers) keys.push_back({variant, j, space, c.id()});
  };
  if (cfg.include_baselines) {
    add_keys("time", -1, "raw_time");
    add_keys("dct", -1, "raw_dct");
  }
  if (any_model && cfg.include_vanilla_vae) add_keys("vanilla_vae", -1, "latent_z");
  if (any_model)
    for (DecoderKind kind : cfg.decoders)
      for (int jv : cfg.j_values)
        for (FeatureSpace space : cfg.feature_spaces)
          add_keys(std::string("isvae_") + isvae::to_string(kind), jv, to_string(space));

  ResultsTable table;
  table.excluded_runs = static_cast<int>(failures.size());
  for (const auto& key : keys) {
    std::vector<double> v, h, c, sil, ch;
    for (const auto& out : outputs) {
      if (!out) continue;
      for (const auto& row : out->rows) {
        if (Key{row.variant, row.j, row.feature_space, row.clusterer} == key) {
          v.push_back(row.report.v_score);
          h.push_back(row.report.homogeneity);
          c.push_back(row.report.completeness);
          sil.push_back(row.report.silhouette);
          ch.push_back(row.report.calinski_harabasz);
        }
      }
    }
    if (v.empty()) continue;
    ResultRow row;
    row.variant = key.variant;
    row.j = key.j;
    row.feature_space = key.space;
    row.clusterer = key.clusterer;
    row.realizations = static_cast<int>(v.size());
    row.v_mean = nan_mean(v);
    row.v_std = nan_std(v);
    row.h_mean = nan_mean(h);
    row.h_std = nan_std(h);
    row.c_mean = nan_mean(c);
    row.c_std = nan_std(c);
    row.sil_mean = nan_mean(sil);
    row.sil_std = nan_std(sil);
    row.ch_mean = nan_mean(ch);
    row.ch_std = nan_std(ch);
    table.rows.push_back(std::move(row));
  }

  table.save_csv((fs::path(cfg.output_dir) / "results.csv").string());
  {
    std::ofstream out(fs::path(cfg.output_dir) / "results.json");
    out << table.to_json().dump(2);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Plot data
// ---------------------------------------------------------------------------

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) cells.push_back(tok);
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

}  // namespace

void emit_plot_data(const std::string& run_dir) {
  const fs::path realization = fs::path(run_dir) / "realization_000";
  if (!fs::exists(realization))
    throw ValidationError("emit_plot_data: " + realization.string() + " not found");

  std::vector<int> truth;
  const fs::path labels_path = realization / "test_labels.csv";
  if (fs::exists(labels_path)) {
    CsvTable t = read_csv(labels_path);
    for (const auto& row : t.rows) truth.push_back(std::stoi(row[0]));
  }

  std::vector<fs::path> variant_dirs;
  for (const auto& entry : fs::directory_iterator(realization))
    if (entry.is_directory()) variant_dirs.push_back(entry.path());
  std::sort(variant_dirs.begin(), variant_dirs.end());

  for (const fs::path& vdir : variant_dirs) {
    const fs::path f0_path = vdir / "features_f0.csv";
    const fs::path out_dir = fs::path(run_dir) / "plots" / vdir.filename();

    if (fs::exists(f0_path)) {
      CsvTable f0 = read_csv(f0_path);

      // first k-means assignment over f0, falling back to any assignment
      std::vector<fs::path> candidates;
      for (const auto& entry : fs::directory_iterator(vdir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("assignments_f0_", 0) == 0) candidates.push_back(entry.path());
      }
      std::sort(candidates.begin(), candidates.end());
      fs::path chosen;
      for (const auto& c : candidates)
        if (c.filename().string().find("kmeans") != std::string::npos) {
          chosen = c;
          break;
        }
      if (chosen.empty() && !candidates.empty()) chosen = candidates.front();

      std::vector<int> pred;
      if (!chosen.empty()) {
        CsvTable a = read_csv(chosen);
        for (const auto& row : a.rows) pred.push_back(std::stoi(row[1]));
      }

      fs::create_directories(out_dir);
      std::ofstream out(out_dir / "f0_scatter.csv");
      out << "index";
      for (size_t c = 0; c < f0.header.size(); ++c) out << ",f_" << (c + 1);
      if (!truth.empty()) out << ",true_label";
      if (!pred.empty()) out << ",pred_label";
      out << "\n";
      for (size_t i = 0; i < f0.rows.size(); ++i) {
        out << i;
        for (const auto& cell : f0.rows[i]) out << ',' << cell;
        if (!truth.empty()) out << ',' << truth[i];
        if (!pred.empty()) out << ',' << pred[i];
        out << "\n";
      }
    }

    const fs::path classes_path = vdir / "trace_classes.csv";
    if (fs::exists(classes_path)) {
      fs::create_directories(out_dir);
      fs::copy_file(classes_path, out_dir / "filter_evolution.csv",
                    fs::copy_options::overwrite_existing);
    }
  }
}

}  // namespace isvae::experiment
