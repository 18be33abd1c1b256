// Command-line front end for the experiment harness.
//
//   isvae run <config.json>            full protocol, writes a run directory
//   isvae plotdata <run_dir>           scatter + filter-evolution CSV bundles
//   isvae gen-synthetic <spec> <out>   sinusoid-mixture dataset to CSV
//   isvae score <features> <labels>    cluster a feature CSV and print metrics

#include "isvae/clustering.hpp"
#include "isvae/datagen.hpp"
#include "isvae/experiment.hpp"
#include "isvae/metrics.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <set>
#include <string>

namespace {

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw isvae::ValidationError("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

// Accepts either a single `label` column or a dataset CSV ending in one.
isvae::VecI read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw isvae::ValidationError("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw isvae::ValidationError("empty label file " + path);
  if (header.size() < 5 || header.substr(header.size() - 5) != "label")
    throw isvae::ValidationError("label CSV must end in a `label` column");
  std::vector<int> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto pos = line.rfind(',');
    values.push_back(std::stoi(pos == std::string::npos ? line : line.substr(pos + 1)));
  }
  isvae::VecI out(static_cast<int>(values.size()));
  for (int i = 0; i < out.size(); ++i) out[i] = values[i];
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ISVAE training and clustering-evaluation harness"};
  app.require_subcommand(1);

  // run
  std::string config_path, output_dir;
  int realizations = -1, epochs = -1, workers = -1;
  long long seed = -1;
  auto* run = app.add_subcommand("run", "Run an experiment config end to end");
  run->add_option("config", config_path, "Experiment config JSON")->required();
  run->add_option("--output-dir", output_dir, "Override output directory");
  run->add_option("--realizations", realizations, "Override n_realizations");
  run->add_option("--epochs", epochs, "Override training epochs");
  run->add_option("--seed", seed, "Override base seed");
  run->add_option("--workers", workers, "Override worker count");

  // plotdata
  std::string run_dir;
  auto* plotdata = app.add_subcommand("plotdata", "Emit plot CSV bundles from a run directory");
  plotdata->add_option("run_dir", run_dir, "Finished run directory")->required();

  // gen-synthetic
  std::string spec_path, out_csv;
  auto* gen = app.add_subcommand("gen-synthetic", "Generate the synthetic dataset as CSV");
  gen->add_option("spec", spec_path, "Synthetic spec JSON")->required();
  gen->add_option("out", out_csv, "Output CSV path")->required();

  // score
  std::string features_path, labels_path, method = "kmeans";
  int score_k = 0, min_pts = 5;
  double eps = 0.5, gamma = 0.0;
  long long score_seed = 0;
  auto* score = app.add_subcommand("score", "Cluster a feature CSV and print the five metrics");
  score->add_option("features", features_path, "Feature CSV (header x0,...)")->required();
  score->add_option("labels", labels_path, "Label CSV (single `label` column)")->required();
  score->add_option("--method", method, "kmeans | dbscan | spectral");
  score->add_option("--k", score_k, "Cluster count (0 = number of label values)");
  score->add_option("--eps", eps, "DBSCAN radius");
  score->add_option("--min-pts", min_pts, "DBSCAN core threshold");
  score->add_option("--gamma", gamma, "Spectral RBF gamma (0 = 1/dim)");
  score->add_option("--seed", score_seed, "Clustering seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = isvae::experiment::experiment_config_from_json(load_json(config_path));
      if (!output_dir.empty()) cfg.output_dir = output_dir;
      if (realizations > 0) cfg.n_realizations = realizations;
      if (epochs >= 0) cfg.train.epochs = epochs;
      if (seed >= 0) cfg.base_seed = static_cast<std::uint64_t>(seed);
      if (workers > 0) cfg.max_workers = workers;
      auto table = isvae::experiment::run_experiment(cfg);
      std::cout << "wrote " << cfg.output_dir << "/results.csv (" << table.rows.size()
                << " rows, " << table.excluded_runs << " excluded runs)\n";
    } else if (*plotdata) {
      isvae::experiment::emit_plot_data(run_dir);
      std::cout << "wrote " << run_dir << "/plots\n";
    } else if (*gen) {
      auto spec = isvae::datagen::synthetic_spec_from_json(load_json(spec_path));
      isvae::Dataset ds = isvae::datagen::generate_synthetic(spec);
      isvae::datagen::save_csv(ds, out_csv);
      std::cout << "wrote " << out_csv << " (" << ds.n() << " x " << ds.dim() << ")\n";
    } else if (*score) {
      isvae::Dataset feats = isvae::datagen::load_csv(features_path);
      isvae::VecI truth = read_labels(labels_path);
      if (truth.size() != feats.n())
        throw isvae::ValidationError("feature/label row counts differ");

      isvae::experiment::ClustererSpec spec;
      spec.method = method;
      spec.k = score_k;
      spec.eps = eps;
      spec.min_pts = min_pts;
      spec.gamma = gamma;
      std::set<int> values(truth.begin(), truth.end());
      const int k = spec.k > 0 ? spec.k : static_cast<int>(values.size());

      isvae::VecI pred;
      if (method == "kmeans")
        pred = isvae::clustering::kmeans(feats.signals, k, score_seed).labels;
      else if (method == "dbscan")
        pred = isvae::clustering::dbscan(feats.signals, eps, min_pts);
      else if (method == "spectral")
        pred = isvae::clustering::spectral_cluster(feats.signals, k, score_seed, gamma);
      else
        throw isvae::ValidationError("unknown method " + method);

      auto report = isvae::metrics::evaluate(feats.signals, truth, pred);
      std::cout << isvae::metrics::to_json(report).dump(2) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
