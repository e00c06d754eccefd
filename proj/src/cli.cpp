#include "actseg/cli.hpp"

#include <CLI11.hpp>

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "actseg/checkpoint.hpp"
#include "actseg/data_io.hpp"
#include "actseg/error.hpp"
#include "actseg/metrics.hpp"
#include "actseg/synth.hpp"
#include "actseg/trainer.hpp"

namespace fs = std::filesystem;

namespace actseg {
namespace cli {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path, bool append = false) {
  std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
  if (!os) throw InputError("cannot write '" + path.string() + "'");
  return os;
}

void write_text(const fs::path& path, const std::string& text) {
  auto os = open_out(path);
  os << text;
}

void ensure_dir(const fs::path& dir) {
  if (dir.empty()) throw ParameterError("an output directory (--out) is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create '" + dir.string() + "': " + ec.message());
}

}  // namespace

std::string run_length_encode(const std::vector<int>& labels) {
  std::string out;
  for (const Segment& s : segments_of(labels)) {
    if (!out.empty()) out += ' ';
    out += std::to_string(s.label) + ':' + std::to_string(s.end - s.start);
  }
  return out;
}

std::string render_timeline(const std::string& title, const std::vector<int>& pred,
                            const std::vector<int>& gt) {
  static const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                         "#9467bd", "#8c564b", "#e377c2", "#bcbd22",
                                         "#17becf", "#7f7f7f"};
  static const char* const kGrey[] = {"#404040", "#707070", "#a0a0a0", "#c8c8c8"};
  constexpr double kWidth = 800.0;
  constexpr double kLeft = 110.0;
  const double scale = pred.empty() ? 0.0 : kWidth / static_cast<double>(pred.size());
  const double height = gt.empty() ? 50.0 : 84.0;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kLeft + kWidth + 10
     << "\" height=\"" << height << "\">\n";
  os << "<title>" << title << "</title>\n";
  os << "<text x=\"4\" y=\"30\" font-size=\"12\">prediction</text>\n";
  for (const Segment& s : segments_of(pred)) {
    os << "<rect class=\"pred\" data-label=\"" << s.label << "\" x=\""
       << fmt(kLeft + scale * static_cast<double>(s.start)) << "\" y=\"14\" width=\""
       << fmt(scale * static_cast<double>(s.end - s.start)) << "\" height=\"24\" fill=\""
       << kPalette[static_cast<std::size_t>(s.label) % std::size(kPalette)] << "\"/>\n";
  }
  if (!gt.empty()) {
    os << "<text x=\"4\" y=\"64\" font-size=\"12\">ground truth</text>\n";
    for (const Segment& s : segments_of(gt)) {
      os << "<rect class=\"gt\" data-label=\"" << s.label << "\" x=\""
         << fmt(kLeft + scale * static_cast<double>(s.start)) << "\" y=\"48\" width=\""
         << fmt(scale * static_cast<double>(s.end - s.start)) << "\" height=\"24\" fill=\""
         << kGrey[static_cast<std::size_t>(s.label) % std::size(kGrey)] << "\"/>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

void cmd_synth(const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
  const SynthSpec spec = config.synth_spec();
  spec.validate();
  ensure_dir(out_dir);
  const SynthDataset data = synth_generate(spec);
  const fs::path manifest = write_dataset(out_dir, data.videos, spec.num_actions);
  write_text(out_dir / "config.txt", config.to_text());
  log << "wrote " << data.videos.size() << " videos, manifest " << manifest.string() << '\n';
}

TrainOutcome cmd_train(const fs::path& manifest_path, const RunConfig& config,
                       const fs::path& out_dir, const fs::path& resume_from, std::ostream& log) {
  ensure_dir(out_dir);
  DatasetManifest manifest;
  const auto videos = load_dataset(manifest_path, &manifest);
  if (videos.empty()) throw InputError("manifest lists no videos");
  const ModelConfig model_config = config.model_config(videos.front().dim(), manifest.num_actions);
  TrainConfig train_config = config.train_config();
  write_text(out_dir / "config.txt", config.to_text());

  const bool labeled = std::all_of(videos.begin(), videos.end(),
                                   [](const FeatureSequence& v) { return v.gt_labels.has_value(); });
  const std::size_t dump_every = config.get_size("dump_every");
  const std::size_t eval_every = std::max<std::size_t>(1, config.get_size("eval_every"));
  const std::size_t checkpoint_every = config.get_size("checkpoint_every");
  const bool resuming = !resume_from.empty();

  auto history = open_out(out_dir / "history.csv", resuming);
  auto costs = open_out(out_dir / "costs.csv", resuming);
  auto dumps = open_out(out_dir / "candidates.tsv", resuming);
  if (!resuming) {
    history << "epoch,temperature,mean_total,mean_c1,mean_c2,mean_c3,mean_cross,mean_loss";
    if (labeled) history << ",mof,f1,jaccard";
    history << '\n';
    costs << "video_id,epoch,candidate_index,c1,c2,c3,c_cross,total,selected\n";
    dumps << "epoch\tvideo_id\trank\ttotal\trle\n";
  }

  auto observer = [&](EpochRecord& rec, const ModelParams& params,
                      std::span<const VideoSelection> selections) {
    if (labeled && (rec.epoch % eval_every == 0 || rec.epoch == 1)) {
      const auto preds = segment_dataset(params, videos);
      const auto summary = evaluate_predictions(videos, preds, params.config.num_actions);
      rec.mof = summary.mean_mof;
      rec.f1 = summary.mean_f1;
      rec.jaccard = summary.mean_jaccard;
    }
    history << rec.epoch << ',' << fmt(rec.temperature) << ',' << fmt(rec.mean_total) << ','
            << fmt(rec.mean_c1) << ',' << fmt(rec.mean_c2) << ',' << fmt(rec.mean_c3) << ','
            << fmt(rec.mean_cross) << ',' << fmt(rec.mean_loss);
    if (labeled) {
      history << ',' << (rec.mof ? fmt(*rec.mof) : "") << ',' << (rec.f1 ? fmt(*rec.f1) : "")
              << ',' << (rec.jaccard ? fmt(*rec.jaccard) : "");
    }
    history << '\n';
    if (dump_every > 0 && (rec.epoch % dump_every == 0 || rec.epoch == 1)) {
      for (std::size_t v = 0; v < selections.size(); ++v) {
        const VideoSelection& s = selections[v];
        for (std::size_t k = 0; k < s.candidates.size(); ++k) {
          const Candidate& c = s.candidates[k];
          costs << videos[v].video_id << ',' << rec.epoch << ',' << k << ',' << fmt(c.c1) << ','
                << fmt(c.c2) << ',' << fmt(c.c3) << ',' << fmt(c.c_cross) << ','
                << fmt(c.total) << ',' << (k == s.selected ? 1 : 0) << '\n';
        }
        for (std::size_t r = 0; r < std::min<std::size_t>(5, s.ranking.ranked.size()); ++r) {
          const Candidate& c = s.candidates[s.ranking.ranked[r]];
          dumps << rec.epoch << '\t' << videos[v].video_id << '\t' << r + 1 << '\t'
                << fmt(c.total) << '\t' << run_length_encode(c.labels.labels) << '\n';
        }
      }
    }
    log << "epoch " << rec.epoch << " cost " << fmt(rec.mean_total);
    if (rec.mof) log << " mof " << fmt(*rec.mof);
    log << '\n';
  };

  const std::size_t target = train_config.epochs;
  auto chunk_end = [&](std::size_t from) {
    return checkpoint_every > 0 ? std::min(target, from + checkpoint_every) : target;
  };
  TrainResult result;
  if (resuming) {
    const Checkpoint ckpt = load_checkpoint(resume_from);
    if (ckpt.params.config.feature_dim != videos.front().dim()) {
      throw DimensionError("checkpoint feature_dim does not match the dataset");
    }
    if (ckpt.epoch >= target) {
      throw ParameterError("checkpoint is already at epoch " + std::to_string(ckpt.epoch) +
                           "; raise epochs to continue");
    }
    log << "resuming at epoch " << ckpt.epoch << '\n';
    train_config.epochs = chunk_end(ckpt.epoch);
    result = resume(videos, ckpt, train_config, observer);
  } else {
    train_config.epochs = chunk_end(0);
    result = train(videos, model_config, train_config, observer);
  }
  while (!result.history.converged && result.state.epoch < target) {
    const Checkpoint ckpt = to_checkpoint(result.params, result.state);
    save_checkpoint(out_dir / "model.ssam", ckpt);
    train_config.epochs = chunk_end(result.state.epoch);
    result = resume(videos, ckpt, train_config, observer);
  }
  save_checkpoint(out_dir / "model.ssam", to_checkpoint(result.params, result.state));
  TrainOutcome outcome;
  outcome.epochs = result.state.epoch;
  outcome.final_cost = result.history.epochs.empty() ? 0.0 : result.history.epochs.back().mean_total;
  log << "trained to epoch " << result.state.epoch
      << (result.history.converged ? " (converged)" : "") << ", checkpoint "
      << (out_dir / "model.ssam").string() << '\n';
  return outcome;
}

void cmd_segment(const fs::path& checkpoint, const fs::path& manifest_path, const fs::path& out_dir,
                 bool svg, std::ostream& log) {
  ensure_dir(out_dir);
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const auto videos = load_dataset(manifest_path);
  const auto preds = segment_dataset(ckpt.params, videos);
  for (std::size_t i = 0; i < videos.size(); ++i) {
    save_labels(out_dir / (videos[i].video_id + ".txt"), preds[i].labels);
    if (svg) {
      write_text(out_dir / (videos[i].video_id + ".svg"),
                 render_timeline(videos[i].video_id, preds[i].labels,
                                 videos[i].gt_labels.value_or(std::vector<int>{})));
    }
  }
  log << "segmented " << videos.size() << " videos into " << out_dir.string() << '\n';
}

EvaluationSummary cmd_eval(const fs::path& manifest_path, const fs::path& predictions_dir,
                           const fs::path& out_dir, std::ostream& log) {
  const auto videos = load_dataset(manifest_path);
  std::vector<ActionSequence> preds;
  for (const auto& v : videos) {
    if (!v.gt_labels) throw InputError("video '" + v.video_id + "' has no ground-truth labels");
    const fs::path p = predictions_dir / (v.video_id + ".txt");
    if (!fs::exists(p)) {
      throw InputError("missing prediction for video '" + v.video_id + "' (" + p.string() + ")");
    }
    preds.push_back({v.video_id, load_labels(p, v.length())});
  }
  const EvaluationSummary summary = evaluate_predictions(videos, preds);

  std::ostringstream csv;
  csv << "scope,task_id,videos,frames,mof,f1,jaccard,precision,recall\n";
  std::size_t frames = 0;
  double precision = 0.0;
  double recall = 0.0;
  for (const auto& t : summary.tasks) {
    csv << "task," << t.task_id << ',' << t.videos << ',' << t.report.frames << ','
        << fmt(t.report.mof) << ',' << fmt(t.report.f1) << ',' << fmt(t.report.jaccard) << ','
        << fmt(t.report.precision) << ',' << fmt(t.report.recall) << '\n';
    log << "task " << t.task_id << ": MoF " << fmt(t.report.mof) << "  F1 " << fmt(t.report.f1)
        << "  Jaccard " << fmt(t.report.jaccard) << "  (" << t.videos << " videos)\n";
    frames += t.report.frames;
    precision += t.report.precision;
    recall += t.report.recall;
  }
  const double n = static_cast<double>(summary.tasks.size());
  csv << "mean,," << videos.size() << ',' << frames << ',' << fmt(summary.mean_mof) << ','
      << fmt(summary.mean_f1) << ',' << fmt(summary.mean_jaccard) << ',' << fmt(precision / n)
      << ',' << fmt(recall / n) << '\n';
  log << "mean: MoF " << fmt(summary.mean_mof) << "  F1 " << fmt(summary.mean_f1)
      << "  Jaccard " << fmt(summary.mean_jaccard) << '\n';
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_text(out_dir / "metrics.csv", csv.str());
  }
  return summary;
}

void cmd_sweep(const fs::path& manifest, const RunConfig& config, const std::string& key,
               const std::vector<std::string>& values, const fs::path& out_dir, std::ostream& log) {
  if (values.empty()) throw ParameterError("sweep needs at least one value");
  ensure_dir(out_dir);
  config.get(key);  // rejects unknown keys before any run starts
  const auto videos = load_dataset(manifest);
  const bool labeled = std::all_of(videos.begin(), videos.end(),
                                   [](const FeatureSequence& v) { return v.gt_labels.has_value(); });

  std::ostringstream summary;
  summary << "key,value,epochs,final_cost";
  if (labeled) summary << ",mof,f1,jaccard";
  summary << '\n';
  for (const std::string& value : values) {
    RunConfig sub = config;
    sub.set(key, value);
    const fs::path dir = out_dir / (key + "-" + value);
    log << "== " << key << " = " << value << '\n';
    std::ostringstream quiet;
    const TrainOutcome outcome = cmd_train(manifest, sub, dir, {}, quiet);
    summary << key << ',' << value << ',' << outcome.epochs << ',' << fmt(outcome.final_cost);
    if (labeled) {
      cmd_segment(dir / "model.ssam", manifest, dir / "segments", sub.get_bool("svg"), quiet);
      const auto s = cmd_eval(manifest, dir / "segments", dir, log);
      summary << ',' << fmt(s.mean_mof) << ',' << fmt(s.mean_f1) << ',' << fmt(s.mean_jaccard);
    }
    summary << '\n';
  }
  write_text(out_dir / "summary.csv", summary.str());
  log << "wrote " << (out_dir / "summary.csv").string() << '\n';
}

}  // namespace cli

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
      return 1;
    case ErrorKind::kData:
      return 2;
    case ErrorKind::kNumeric:
      return 3;
  }
  return 2;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsupervised action segmentation by constraint-ranked self-labeling", "actseg"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<long long> seed;
  std::optional<long long> threads;
  std::vector<std::string> overrides;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value configuration file");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "run seed (synth: generator seed)");
    sub->add_option("--threads", threads, "OpenMP threads for the E-step");
    sub->add_option("--set", overrides, "override a config key, key=value (repeatable)");
  };

  std::string manifest;
  std::string resume_from;
  std::string checkpoint;
  std::string predictions;
  std::string sweep_key;
  std::vector<std::string> sweep_values;
  bool no_svg = false;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  common(synth);
  CLI::App* train = app.add_subcommand("train", "train a model on a manifest");
  common(train);
  train->add_option("--manifest", manifest, "dataset manifest")->required();
  train->add_option("--resume", resume_from, "checkpoint to continue from");
  CLI::App* segment = app.add_subcommand("segment", "greedy segmentation with a trained model");
  common(segment);
  segment->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  segment->add_option("--manifest", manifest, "dataset manifest")->required();
  segment->add_flag("--no-svg", no_svg, "skip SVG timelines");
  CLI::App* eval = app.add_subcommand("eval", "score predictions against ground truth");
  common(eval);
  eval->add_option("--manifest", manifest, "dataset manifest with labels")->required();
  eval->add_option("--predictions", predictions, "directory of <video_id>.txt files")->required();
  CLI::App* sweep = app.add_subcommand("sweep", "train once per value of a config key");
  common(sweep);
  sweep->add_option("--manifest", manifest, "dataset manifest")->required();
  sweep->add_option("--key", sweep_key, "config key to vary")->required();
  sweep->add_option("--values", sweep_values, "values, comma separated")
      ->required()
      ->delimiter(',');

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    // Subcommand help requests also arrive here.
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) config.load_file(config_path);
    for (const auto& o : overrides) config.set_assignment(o);
    if (seed) config.set(synth->parsed() ? "synth_seed" : "seed", std::to_string(*seed));
    if (threads) config.set("threads", std::to_string(*threads));
    if (!config.is_explicit("svg") && no_svg) config.set("svg", "false");

    if (synth->parsed()) {
      cli::cmd_synth(config, out_dir, out);
    } else if (train->parsed()) {
      cli::cmd_train(manifest, config, out_dir, resume_from, out);
    } else if (segment->parsed()) {
      cli::cmd_segment(checkpoint, manifest, out_dir, config.get_bool("svg") && !no_svg, out);
    } else if (eval->parsed()) {
      cli::cmd_eval(manifest, predictions, out_dir, out);
    } else if (sweep->parsed()) {
      if (out_dir.empty()) throw ParameterError("an output directory (--out) is required");
      cli::cmd_sweep(manifest, config, sweep_key, sweep_values, out_dir, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace actseg
