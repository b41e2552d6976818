// geofuse: synthetic corpus generation, stratified splitting, training,
// evaluation and baseline-vs-KGML comparison.

#include <CLI11.hpp>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "geofuse/config.hpp"
#include "geofuse/error.hpp"
#include "geofuse/manifest.hpp"
#include "geofuse/metrics.hpp"
#include "geofuse/synth.hpp"
#include "geofuse/train.hpp"

namespace fs = std::filesystem;
using namespace geofuse;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  bool verbose = false;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

fs::path prepare_out(const Globals& g) {
  if (g.out.empty()) throw Error("--out is required");
  const fs::path out(g.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (!fs::is_directory(out)) throw Error("cannot create output directory " + out.string());
  const auto probe = out / ".geofuse-write-test";
  {
    std::ofstream f(probe);
    if (!f) throw Error("output directory is not writable: " + out.string());
  }
  fs::remove(probe, ec);
  return out;
}

// Shortest text that parses back to the same double.
std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

RunConfig base_config(const Globals& g) {
  RunConfig rc = g.config.empty() ? RunConfig() : RunConfig::load(g.config);
  if (g.seed) rc.set("seed", std::to_string(*g.seed));
  return rc;
}

// Echo of the resolved configuration plus the command that produced the
// directory; enough to re-run it.
void write_echo(const fs::path& out, const std::string& command, const RunConfig& rc) {
  write_text(out / "config.txt", "# " + command + "\n" + rc.echo());
}

EvalReport load_report(const fs::path& path) {
  const auto text = read_text(path);
  if (text.rfind("label,", 0) == 0) return parse_report_csv(text);
  return parse_report_table(text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geofuse: knowledge-guided CNN+ViT power plant classification"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "global seed");
  app.add_option("--config", g.config, "key = value configuration file");
  app.add_option("--out", g.out, "output directory");
  app.add_flag("--verbose,-v", g.verbose, "progress on stderr");

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic image/mask corpus and manifest");
  std::optional<int> per_class, size;
  std::optional<double> snr;
  synth->add_option("--per-class", per_class, "samples per class");
  synth->add_option("--size", size, "tile side length in pixels");
  synth->add_option("--snr", snr, "plant pattern contrast relative to the distractor");

  // split
  auto* split = app.add_subcommand("split", "stratified train/test split of a manifest");
  std::string split_manifest;
  std::optional<double> test_fraction;
  split->add_option("--manifest", split_manifest, "input manifest")->required();
  split->add_option("--test-fraction", test_fraction, "per-class test fraction in [0, 1]");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a baseline or KGML model");
  std::optional<std::string> train_mode, train_manifest;
  train_cmd->add_option("--mode", train_mode, "baseline or kgml");
  train_cmd->add_option("--manifest", train_manifest, "training manifest (overrides train_manifest)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
  std::string checkpoint_path;
  std::optional<std::string> eval_manifest, eval_mode;
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "evaluation manifest (overrides test_manifest)");
  eval_cmd->add_option("--mode", eval_mode, "expected mode; must match the checkpoint");

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "per-class deltas between two reports (b - a)");
  std::string report_a, report_b;
  compare_cmd->add_option("--a", report_a, "reference report (report.csv or report.txt)")->required();
  compare_cmd->add_option("--b", report_b, "candidate report")->required();

  CLI11_PARSE(app, argc, argv);

  std::string command_line = "geofuse";
  for (int i = 1; i < argc; ++i) command_line += std::string(" ") + argv[i];

  try {
    if (*synth) {
      RunConfig rc = base_config(g);
      if (per_class) rc.set("synth_per_class", std::to_string(*per_class));
      if (size) rc.set("synth_size", std::to_string(*size));
      if (snr) rc.set("synth_snr", shortest(*snr));
      const auto sc = rc.synth_config();
      const auto out = prepare_out(g);
      const auto m = write_synth_corpus(sc, out);
      write_echo(out, command_line, rc);
      if (g.verbose) std::cerr << "wrote " << m.size() << " samples to " << out << "\n";
    } else if (*split) {
      RunConfig rc = base_config(g);
      if (test_fraction) rc.set("test_fraction", shortest(*test_fraction));
      const auto m = load_manifest(split_manifest);
      const auto out = prepare_out(g);
      const auto result = stratified_split(m, rc.get_double("test_fraction"), rc.get_u64("seed"));
      write_manifest(result.train, out / "train.csv");
      write_manifest(result.test, out / "test.csv");
      write_echo(out, command_line, rc);
      if (g.verbose) {
        const auto d = class_distribution(result.test);
        std::cerr << "test supports:";
        for (auto l : kAllLabels) std::cerr << ' ' << code(l) << '=' << d[l];
        std::cerr << "\n";
      }
    } else if (*train_cmd) {
      RunConfig rc = base_config(g);
      if (train_mode) rc.set("mode", *train_mode);
      if (train_manifest) rc.set("train_manifest", *train_manifest);
      const auto tc = rc.train_config();
      const auto mc = rc.model_config();
      const auto masks = mc.mode == Mode::Kgml ? rc.mask_options() : MaskOptions{};
      if (rc.get("train_manifest").empty()) throw Error("no training manifest (use --manifest or train_manifest)");
      const auto m = load_manifest(rc.get("train_manifest"));
      if (mc.mode == Mode::Kgml) require_masks(m);
      const auto out = prepare_out(g);
      const auto t0 = std::chrono::steady_clock::now();
      const auto result = train(tc, mc, m, masks, [&](int epoch, double loss) {
        if (g.verbose) std::cerr << "epoch " << epoch << " mean_loss " << loss << "\n";
      });
      save_checkpoint(result.checkpoint, out / "model.ckpt");
      write_text(out / "history.csv", format_history(result.history));
      save_stats(result.checkpoint.stats, out / "stats.txt");
      write_echo(out, command_line, rc);
      if (g.verbose) {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cerr << "trained " << param_count(mc) << " parameters in " << secs << " s\n";
      }
    } else if (*eval_cmd) {
      RunConfig rc = base_config(g);
      if (eval_manifest) rc.set("test_manifest", *eval_manifest);
      const auto ckpt = load_checkpoint(checkpoint_path);
      const Mode mode = eval_mode ? parse_mode(*eval_mode) : ckpt.model.mode;
      set_model_config(rc, ckpt.model);
      if (rc.get("test_manifest").empty()) throw Error("no evaluation manifest (use --manifest or test_manifest)");
      const auto masks = mode == Mode::Kgml ? rc.mask_options() : MaskOptions{};
      const auto m = load_manifest(rc.get("test_manifest"));
      const auto out = prepare_out(g);
      const auto report = evaluate(ckpt, m, mode, masks);
      write_text(out / "report.txt", render_report(report));
      write_text(out / "report.csv", render_report_csv(report));
      write_text(out / "confusion.csv", render_confusion_csv(*report.confusion));
      write_echo(out, command_line, rc);
      if (g.verbose) std::cerr << render_report(report);
    } else if (*compare_cmd) {
      RunConfig rc = base_config(g);
      const auto a = load_report(report_a);
      const auto b = load_report(report_b);
      const auto cmp = compare(a, b);
      const auto out = prepare_out(g);
      write_text(out / "comparison.csv", render_comparison_csv(cmp));
      write_text(out / "comparison.txt", render_comparison(cmp));
      write_echo(out, command_line, rc);
      if (g.verbose) std::cerr << render_comparison(cmp);
    }
  } catch (const std::exception& e) {
    std::cerr << "geofuse: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
