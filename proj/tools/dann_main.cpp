// dann_main.cpp: command line entry point.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Subcommands cover the whole pipeline: featurize, synth, pretrain, adapt,
// upperbound, evaluate, fuse, export-embeddings. Stages communicate through
// fixed file names under --out (pretrain.ckpt, adapt_gan.ckpt, ...), so a
// full run is a sequence of invocations sharing one output directory.
// Everything is deterministic in --seed: rerunning a command with the same
// inputs reproduces its artifacts byte for byte.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "dann/dann.hpp"

namespace fs = std::filesystem;

namespace {

struct Opts {
  std::string manifest;
  std::string spec;
  std::string variant;
  std::string out = ".";
  std::uint64_t seed = 1;
  std::size_t batch_size = 64;
  double lambda = 1.0;
  std::size_t workers = 1;
  std::vector<std::string> inputs;  // positional checkpoint/prediction paths

  CLI::Option* seed_opt = nullptr;
  CLI::Option* batch_opt = nullptr;
  CLI::Option* lambda_opt = nullptr;
};

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

/// Experiment spec from --spec (or defaults) with flag overrides applied.
dann::ExperimentSpec build_spec(const Opts& o) {
  dann::ExperimentSpec spec = o.spec.empty()
                                  ? dann::ExperimentSpec{}
                                  : dann::ExperimentSpec::from_file(o.spec);
  if (!o.variant.empty()) spec.train.variant = dann::parse_train_mode(o.variant);
  if (o.seed_opt && o.seed_opt->count()) spec.train.seed = o.seed;
  if (o.batch_opt && o.batch_opt->count()) spec.train.batch_size = o.batch_size;
  if (o.lambda_opt && o.lambda_opt->count()) spec.train.lambda = o.lambda;
  spec.finalize();
  spec.validate();
  return spec;
}

/// Loads the manifest and splices every session into per-domain/per-split
/// sample pools. Target speaker labels survive only when `keep_target_labels`
/// (evaluation and upper-bound training). A nonzero `window_override` takes
/// the splice width from a restored checkpoint instead of the spec.
dann::ExperimentData load_experiment(const Opts& o,
                                     const dann::ExperimentSpec& spec,
                                     bool keep_target_labels,
                                     bool carve_heldout,
                                     std::size_t window_override = 0) {
  if (o.manifest.empty()) {
    throw dann::ConfigError("this subcommand needs --manifest");
  }
  auto manifests = dann::load_manifest(o.manifest);
  if (carve_heldout) dann::ensure_source_heldout(manifests, spec);
  const std::size_t window =
      window_override ? window_override : spec.model.window;
  auto sessions = dann::load_sessions(manifests, {}, window, o.workers);
  std::vector<std::string> skipped;
  auto data = dann::assemble_experiment_data(spec, sessions,
                                             keep_target_labels, &skipped);
  if (!skipped.empty()) {
    const std::set<std::string> tags(skipped.begin(), skipped.end());
    std::cerr << "warning: skipped " << skipped.size()
              << " session(s) with unmapped domain tag(s):";
    for (const auto& t : tags) std::cerr << " '" << t << "'";
    std::cerr << "\n";
  }
  return data;
}

/// Per-epoch log lines. best_error = 1 - best held-out accuracy so far, a
/// monotone non-increasing column that smoke tests can assert on.
void print_history(const std::vector<dann::EpochRecord>& history) {
  double best = 0.0;
  for (const auto& r : history) {
    best = std::max(best, r.heldout_accuracy);
    std::cout << "epoch=" << r.epoch << " task_loss=" << fmt6(r.task_loss)
              << " domain_loss=" << fmt6(r.domain_loss)
              << " adv_loss=" << fmt6(r.adv_loss)
              << " heldout_accuracy=" << fmt6(r.heldout_accuracy)
              << " best_error=" << fmt6(1.0 - best) << "\n";
  }
}

std::string out_path(const Opts& o, const std::string& name) {
  fs::create_directories(o.out);
  return (fs::path(o.out) / name).string();
}

bool is_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  return in.read(magic, 4) && std::string(magic, 4) == "DANN";
}

void write_report_file(const std::string& path, const dann::F1Report& report) {
  std::ofstream out(path);
  if (!out) throw dann::IoError("cannot open for writing: " + path);
  dann::write_report(out, report);
}

// --- subcommands ---------------------------------------------------------

int run_featurize(const Opts& o) {
  if (o.manifest.empty()) {
    throw dann::ConfigError("featurize needs --manifest");
  }
  const auto manifests = dann::load_manifest(o.manifest);
  fs::create_directories(fs::path(o.out) / "feats");
  fs::create_directories(fs::path(o.out) / "labels");

  // Featurization parallelizes over sessions; results land by index, so the
  // worker count never changes any output byte.
  std::vector<dann::Tensor> feats(manifests.size());
  std::vector<char> usable(manifests.size(), 0);
  const std::size_t n_threads =
      std::max<std::size_t>(1, std::min(o.workers, manifests.size()));
  std::vector<std::exception_ptr> errors(n_threads);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < manifests.size(); i += n_threads) {
          if (manifests[i].is_feature) {
            feats[i] = dann::load_tensor(manifests[i].audio);
            usable[i] = 1;
          } else {
            dann::FeatureMatrix fm =
                dann::mfcc(dann::read_wav(manifests[i].audio));
            if (!fm.too_short) {
              feats[i] = std::move(fm.frames);
              usable[i] = 1;
            }
          }
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<dann::ManifestRow> rows;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < manifests.size(); ++i) {
    const auto& m = manifests[i];
    if (!usable[i]) {
      ++skipped;
      std::cerr << "warning: session '" << m.session_id
                << "' is shorter than one frame, skipping\n";
      continue;
    }
    const std::string feat_rel = "feats/" + m.session_id + ".dtns";
    const std::string label_rel = "labels/" + m.session_id + ".seg";
    dann::save_tensor((fs::path(o.out) / feat_rel).string(), feats[i]);
    fs::copy_file(m.labels, fs::path(o.out) / label_rel,
                  fs::copy_options::overwrite_existing);
    rows.push_back({m.session_id, m.domain_tag, "feat:" + feat_rel, label_rel,
                    m.split});
  }
  const std::string manifest_path = out_path(o, "manifest.tsv");
  dann::write_manifest(manifest_path, rows);
  std::cout << "featurized " << rows.size() << " session(s), skipped "
            << skipped << "\nmanifest=" << manifest_path << "\n";
  return 0;
}

int run_synth(const Opts& o) {
  dann::SyntheticSpec spec = o.spec.empty()
                                 ? dann::SyntheticSpec{}
                                 : dann::SyntheticSpec::from_file(o.spec);
  if (o.seed_opt && o.seed_opt->count()) spec.seed = o.seed;
  const std::string manifest_path = dann::make_synthetic_corpus(spec, o.out);
  std::cout << "sessions=" << 2 * spec.sessions_per_domain
            << " frames_per_session=" << spec.frames_per_session
            << " seed=" << spec.seed << "\nmanifest=" << manifest_path << "\n";
  return 0;
}

int run_pretrain(const Opts& o) {
  dann::ExperimentSpec spec = build_spec(o);
  spec.train.variant = dann::TrainMode::kPretrainOnly;
  const auto data = load_experiment(o, spec, /*keep_target_labels=*/false,
                                    /*carve_heldout=*/true);
  dann::RngState init(spec.train.seed);
  dann::ModelBundle m(spec.model, init);
  const auto history =
      dann::train_task(m, data.at(dann::kSource, dann::Split::kTrain),
                       data.at(dann::kSource, dann::Split::kHeldout),
                       spec.train);
  print_history(history);
  dann::write_history(out_path(o, "pretrain_history.tsv"), history);
  dann::save_checkpoint(out_path(o, "pretrain.ckpt"), m,
                        dann::Stage::kPretrain);
  std::cout << "checkpoint=" << out_path(o, "pretrain.ckpt") << "\n";
  return 0;
}

int run_adapt(const Opts& o) {
  dann::ExperimentSpec spec = build_spec(o);
  if (spec.train.variant != dann::TrainMode::kGan &&
      spec.train.variant != dann::TrainMode::kGr) {
    throw dann::ConfigError("adapt needs --variant gan or --variant gr");
  }
  const std::string stem =
      std::string("adapt_") + dann::train_mode_name(spec.train.variant);
  const auto data = load_experiment(o, spec, /*keep_target_labels=*/false,
                                    /*carve_heldout=*/true);

  // The bundle comes from the spec so --lambda and --variant shape the
  // adversarial layers; the checkpoint only supplies weights and stage.
  dann::RngState init(spec.train.seed);
  dann::ModelBundle m(spec.model, init);
  const std::string ckpt_path =
      o.inputs.empty() ? out_path(o, "pretrain.ckpt") : o.inputs[0];
  const dann::Stage stage =
      dann::load_into(m, dann::read_checkpoint(ckpt_path));

  const auto history = dann::train_adversarial(
      m, stage, data.at(dann::kSource, dann::Split::kTrain),
      data.at(dann::kSource, dann::Split::kHeldout),
      data.at(dann::kTarget, dann::Split::kTrain), spec.train);
  print_history(history);
  dann::write_history(out_path(o, stem + "_history.tsv"), history);
  dann::save_checkpoint(out_path(o, stem + ".ckpt"), m,
                        dann::Stage::kAdapted);
  std::cout << "checkpoint=" << out_path(o, stem + ".ckpt") << "\n";
  return 0;
}

int run_upperbound(const Opts& o) {
  dann::ExperimentSpec spec = build_spec(o);
  spec.train.variant = dann::TrainMode::kUpperBound;
  // The upper bound explicitly trains on labeled data from both domains.
  const auto data = load_experiment(o, spec, /*keep_target_labels=*/true,
                                    /*carve_heldout=*/true);
  std::vector<dann::SpliceSample> train =
      data.at(dann::kSource, dann::Split::kTrain);
  const auto& target = data.at(dann::kTarget, dann::Split::kTrain);
  train.insert(train.end(), target.begin(), target.end());

  dann::RngState init(spec.train.seed);
  dann::ModelBundle m(spec.model, init);
  const auto history =
      dann::train_task(m, train,
                       data.at(dann::kSource, dann::Split::kHeldout),
                       spec.train);
  print_history(history);
  dann::write_history(out_path(o, "upperbound_history.tsv"), history);
  dann::save_checkpoint(out_path(o, "upperbound.ckpt"), m,
                        dann::Stage::kUpperBound);
  std::cout << "checkpoint=" << out_path(o, "upperbound.ckpt") << "\n";
  return 0;
}

int run_evaluate(const Opts& o) {
  const std::string& input = o.inputs[0];
  dann::PredictionSet preds;
  if (is_checkpoint_file(input)) {
    dann::ModelBundle m = dann::restore_model(input);
    const dann::ExperimentSpec spec = build_spec(o);
    const auto data = load_experiment(o, spec, /*keep_target_labels=*/true,
                                      /*carve_heldout=*/false,
                                      m.config().window);
    const auto& test = data.at(dann::kTarget, dann::Split::kTest);
    if (test.empty()) {
      throw dann::ConfigError("manifest has no labeled target test samples");
    }
    preds = dann::predict(m, test);
    dann::write_predictions(out_path(o, "evaluate_predictions.tsv"), preds);
  } else {
    preds = dann::read_predictions(input);
  }
  const dann::F1Report report = dann::mean_f1(preds, /*per_session=*/true);
  write_report_file(out_path(o, "evaluate_report.txt"), report);
  dann::write_report(std::cout, report);
  return 0;
}

int run_fuse(const Opts& o) {
  dann::ModelBundle gan = dann::restore_model(o.inputs[0]);
  dann::ModelBundle gr = dann::restore_model(o.inputs[1]);
  if (gan.config().embed_dim != gr.config().embed_dim ||
      gan.config().window != gr.config().window) {
    throw dann::ConfigError("fuse needs checkpoints with matching embedding "
                            "and splice dimensions");
  }

  const dann::ExperimentSpec spec = build_spec(o);
  const auto data = load_experiment(o, spec, /*keep_target_labels=*/true,
                                    /*carve_heldout=*/true,
                                    gan.config().window);
  const auto& test = data.at(dann::kTarget, dann::Split::kTest);
  if (test.empty()) {
    throw dann::ConfigError("manifest has no labeled target test samples");
  }

  // Score fusion: per-sample posterior means over the target test split.
  const auto preds_gan = dann::predict(gan, test);
  const auto preds_gr = dann::predict(gr, test);
  const auto fused = dann::score_fuse(preds_gan, preds_gr);
  dann::write_predictions(out_path(o, "fuse_score_predictions.tsv"), fused);
  const auto score_report = dann::mean_f1(fused, /*per_session=*/true);
  write_report_file(out_path(o, "fuse_score_report.txt"), score_report);

  // Embedding fusion: train a fresh classifier on concatenated source
  // embeddings, early-stopped on the held-out source sessions.
  const auto& src_train = data.at(dann::kSource, dann::Split::kTrain);
  const auto& src_heldout = data.at(dann::kSource, dann::Split::kHeldout);
  if (src_train.empty() || src_heldout.empty()) {
    throw dann::ConfigError("embedding fusion needs labeled source training "
                            "and held-out samples");
  }
  auto labels_of = [](const std::vector<dann::SpliceSample>& samples) {
    std::vector<int> labels;
    labels.reserve(samples.size());
    for (const auto& s : samples) labels.push_back(s.label);
    return labels;
  };
  const auto train_gan = dann::compute_embeddings(gan, src_train);
  const auto train_gr = dann::compute_embeddings(gr, src_train);
  const auto held_gan = dann::compute_embeddings(gan, src_heldout);
  const auto held_gr = dann::compute_embeddings(gr, src_heldout);

  dann::FusionNetConfig fcfg;
  fcfg.embed_dim = gan.config().embed_dim;
  fcfg.batch_size = spec.train.batch_size;
  fcfg.dropout = spec.model.dropout;
  fcfg.bn_momentum = spec.model.bn_momentum;
  fcfg.bn_eps = spec.model.bn_eps;
  fcfg.seed = spec.train.seed;
  dann::FusionNet net = dann::embed_fuse_train(
      train_gan.vectors, train_gr.vectors, labels_of(src_train), fcfg,
      held_gan.vectors, held_gr.vectors, labels_of(src_heldout));

  const auto test_gan = dann::compute_embeddings(gan, test);
  const auto test_gr = dann::compute_embeddings(gr, test);
  const auto embed_preds = dann::predict_fusion(net, test_gan, test_gr);
  dann::write_predictions(out_path(o, "fuse_embed_predictions.tsv"),
                          embed_preds);
  const auto embed_report = dann::mean_f1(embed_preds, /*per_session=*/true);
  write_report_file(out_path(o, "fuse_embed_report.txt"), embed_report);

  std::cout << "score_fusion_mean_f1=" << fmt6(score_report.mean_f1)
            << "\nembed_fusion_mean_f1=" << fmt6(embed_report.mean_f1)
            << "\n";
  return 0;
}

int run_export_embeddings(const Opts& o) {
  dann::ModelBundle m = dann::restore_model(o.inputs[0]);
  const dann::ExperimentSpec spec = build_spec(o);
  // Keep the label firewall: target labels export as '?'.
  const auto data = load_experiment(o, spec, /*keep_target_labels=*/false,
                                    /*carve_heldout=*/false,
                                    m.config().window);
  std::vector<dann::SpliceSample> samples =
      data.at(dann::kSource, dann::Split::kTest);
  const auto& target = data.at(dann::kTarget, dann::Split::kTest);
  samples.insert(samples.end(), target.begin(), target.end());
  if (samples.empty()) {
    throw dann::ConfigError("manifest has no test-split samples to embed");
  }
  const std::string path = out_path(o, "embeddings.dtns");
  dann::export_embeddings(m, samples, path);
  std::cout << "samples=" << samples.size() << "\nembeddings=" << path
            << "\n";
  return 0;
}

/// Attaches the shared flag set; which flags exist on a subcommand is part
/// of the interface, so each one opts in explicitly.
void add_common(CLI::App* sub, Opts& o, bool manifest, bool spec, bool variant,
                bool seed, bool batch, bool lambda, bool workers) {
  if (manifest) {
    sub->add_option("--manifest", o.manifest, "session manifest (tsv)");
  }
  if (spec) sub->add_option("--spec", o.spec, "experiment spec (key=value)");
  if (variant) {
    sub->add_option("--variant", o.variant, "adversarial flavor")
        ->check(CLI::IsMember({"gan", "gr"}));
  }
  if (seed) o.seed_opt = sub->add_option("--seed", o.seed, "rng seed");
  if (batch) {
    o.batch_opt = sub->add_option("--batch-size", o.batch_size, "batch size");
  }
  if (lambda) {
    o.lambda_opt =
        sub->add_option("--lambda", o.lambda, "gradient reversal strength");
  }
  sub->add_option("--out", o.out, "output directory");
  if (workers) {
    sub->add_option("--workers", o.workers, "parallel featurization workers");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"domain-adversarial sequence classifier"};
  app.require_subcommand(1);

  Opts featurize_o, synth_o, pretrain_o, adapt_o, upper_o, eval_o, fuse_o,
      export_o;

  CLI::App* featurize =
      app.add_subcommand("featurize", "extract features for a manifest");
  add_common(featurize, featurize_o, true, false, false, false, false, false,
             true);

  CLI::App* synth =
      app.add_subcommand("synth", "generate a synthetic two-domain corpus");
  add_common(synth, synth_o, false, true, false, true, false, false, false);

  CLI::App* pretrain =
      app.add_subcommand("pretrain", "train on labeled source data");
  add_common(pretrain, pretrain_o, true, true, false, true, true, false, true);

  CLI::App* adapt =
      app.add_subcommand("adapt", "adversarially adapt a pretrained model");
  add_common(adapt, adapt_o, true, true, true, true, true, true, true);
  adapt->add_option("checkpoint", adapt_o.inputs,
                    "pretrained checkpoint (default <out>/pretrain.ckpt)")
      ->expected(0, 1);

  CLI::App* upper = app.add_subcommand(
      "upperbound", "train on labeled data from both domains");
  add_common(upper, upper_o, true, true, false, true, true, false, true);

  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "score a checkpoint or a predictions file");
  add_common(evaluate, eval_o, true, true, false, true, false, false, true);
  evaluate->add_option("input", eval_o.inputs,
                       "checkpoint or predictions file")
      ->required()
      ->expected(1);

  CLI::App* fuse = app.add_subcommand(
      "fuse", "score- and embedding-fuse a gan and a gr checkpoint");
  add_common(fuse, fuse_o, true, true, false, true, true, false, true);
  fuse->add_option("checkpoints", fuse_o.inputs,
                   "gan checkpoint, then gr checkpoint")
      ->required()
      ->expected(2);

  CLI::App* exporter = app.add_subcommand(
      "export-embeddings", "write test-split embeddings for a checkpoint");
  add_common(exporter, export_o, true, true, false, true, false, false, true);
  exporter->add_option("checkpoint", export_o.inputs, "model checkpoint")
      ->required()
      ->expected(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*featurize) return run_featurize(featurize_o);
    if (*synth) return run_synth(synth_o);
    if (*pretrain) return run_pretrain(pretrain_o);
    if (*adapt) return run_adapt(adapt_o);
    if (*upper) return run_upperbound(upper_o);
    if (*evaluate) return run_evaluate(eval_o);
    if (*fuse) return run_fuse(fuse_o);
    if (*exporter) return run_export_embeddings(export_o);
  } catch (const dann::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
