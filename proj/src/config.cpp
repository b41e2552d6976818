#include "geofuse/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "geofuse/error.hpp"
#include "geofuse/synth.hpp"
#include "geofuse/train.hpp"

namespace geofuse {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"seed", "0", "global seed for splitting, initialization, shuffling and augmentation"},
      {"mode", "baseline", "baseline (CNN+ViT on imagery) or kgml (CNN on the spatial mask)"},
      {"image_size", "224", "model input side length in pixels"},
      {"patch_size", "16", "ViT patch side length"},
      {"embed_dim", "192", "ViT token width D_v"},
      {"depth", "6", "number of ViT encoder blocks"},
      {"heads", "3", "attention heads per block"},
      {"mlp_ratio", "4", "ViT MLP hidden width as a multiple of embed_dim"},
      {"pooling", "mean_tokens", "h_vit pooling: mean_tokens or cls_token"},
      {"cnn_input", "mask", "kgml CNN input: mask or image_mask (4 channels)"},
      {"reduced_dim", "128", "width of the fully connected reduction layer"},
      {"epochs", "30", "training epochs"},
      {"batch_size", "32", "mini-batch size"},
      {"learning_rate", "0.0003", "AdamW learning rate"},
      {"weight_decay", "0.0001", "AdamW decoupled weight decay"},
      {"class_weights", "false", "inverse-frequency class weights in the loss"},
      {"augment", "true", "random flips and +/-10 degree rotation during training"},
      {"test_fraction", "0.3", "per-class fraction assigned to the test split"},
      {"train_manifest", "", "training manifest for the train command"},
      {"test_manifest", "", "evaluation manifest for the eval command"},
      {"mask_source", "file", "file (0/255 mask rasters) or landcover (code rasters)"},
      {"landcover_codes", "", "comma-separated land-cover codes marked relevant"},
      {"code_book", "", "land-cover code book file ('<code> <name>' lines)"},
      {"synth_per_class", "100", "synthetic samples per class"},
      {"synth_size", "224", "synthetic tile side length"},
      {"synth_snr", "1.6", "contrast of the plant pattern relative to the distractor pattern"},
  };
  return keys;
}

const std::vector<std::string_view>& model_config_keys() {
  static const std::vector<std::string_view> keys = {"mode",      "image_size", "patch_size",
                                                     "embed_dim", "depth",      "heads",
                                                     "mlp_ratio", "pooling",    "cnn_input",
                                                     "reduced_dim"};
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_.emplace(std::string(k.name), std::string(k.default_value));
}

RunConfig RunConfig::parse(std::string_view text, const std::string& source) {
  RunConfig rc;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      rc.set(trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rc;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

void RunConfig::set(std::string_view key, std::string value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error("unknown config key '" + std::string(key) + "'");
  it->second = std::move(value);
}

const std::string& RunConfig::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error("unknown config key '" + std::string(key) + "'");
  return it->second;
}

namespace {
template <typename N>
N parse_number(std::string_view key, const std::string& v) {
  N out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw Error("config key '" + std::string(key) + "': invalid number '" + v + "'");
  }
  return out;
}
}  // namespace

int RunConfig::get_int(std::string_view key) const { return parse_number<int>(key, get(key)); }

double RunConfig::get_double(std::string_view key) const { return parse_number<double>(key, get(key)); }

std::uint64_t RunConfig::get_u64(std::string_view key) const {
  return parse_number<std::uint64_t>(key, get(key));
}

bool RunConfig::get_bool(std::string_view key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("config key '" + std::string(key) + "': expected true or false, got '" + v + "'");
}

std::set<int> RunConfig::get_int_set(std::string_view key) const {
  std::set<int> out;
  const auto& v = get(key);
  std::size_t start = 0;
  while (start <= v.size()) {
    auto end = v.find(',', start);
    if (end == std::string::npos) end = v.size();
    const auto item = trim(std::string_view(v).substr(start, end - start));
    if (!item.empty()) out.insert(parse_number<int>(key, item));
    start = end + 1;
  }
  return out;
}

std::string RunConfig::echo() const {
  std::vector<std::string_view> names;
  for (const auto& k : config_keys()) names.push_back(k.name);
  return echo(names);
}

std::string RunConfig::echo(const std::vector<std::string_view>& names) const {
  std::string out;
  for (auto n : names) {
    out += n;
    out += " = ";
    out += get(n);
    out += '\n';
  }
  return out;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig mc;
  mc.mode = parse_mode(get("mode"));
  mc.vit.image_size = get_int("image_size");
  mc.vit.patch_size = get_int("patch_size");
  mc.vit.embed_dim = get_int("embed_dim");
  mc.vit.depth = get_int("depth");
  mc.vit.heads = get_int("heads");
  mc.vit.mlp_ratio = get_double("mlp_ratio");
  mc.vit.pooling = parse_pooling(get("pooling"));
  mc.cnn_input = parse_cnn_input(get("cnn_input"));
  mc.reduced_dim = get_int("reduced_dim");
  mc.validate();
  return mc;
}

void set_model_config(RunConfig& rc, const ModelConfig& mc) {
  rc.set("mode", std::string(mode_name(mc.mode)));
  rc.set("image_size", std::to_string(mc.vit.image_size));
  rc.set("patch_size", std::to_string(mc.vit.patch_size));
  rc.set("embed_dim", std::to_string(mc.vit.embed_dim));
  rc.set("depth", std::to_string(mc.vit.depth));
  rc.set("heads", std::to_string(mc.vit.heads));
  std::ostringstream ratio;
  ratio.precision(17);
  ratio << mc.vit.mlp_ratio;
  rc.set("mlp_ratio", ratio.str());
  rc.set("pooling", std::string(pooling_name(mc.vit.pooling)));
  rc.set("cnn_input", std::string(cnn_input_name(mc.cnn_input)));
  rc.set("reduced_dim", std::to_string(mc.reduced_dim));
}

TrainConfig RunConfig::train_config() const {
  TrainConfig tc;
  tc.epochs = get_int("epochs");
  tc.batch_size = get_int("batch_size");
  tc.learning_rate = get_double("learning_rate");
  tc.weight_decay = get_double("weight_decay");
  tc.seed = get_u64("seed");
  tc.mode = parse_mode(get("mode"));
  tc.class_weights = get_bool("class_weights");
  tc.augment = get_bool("augment");
  tc.validate();
  return tc;
}

SynthConfig RunConfig::synth_config() const {
  SynthConfig sc;
  sc.per_class = get_int("synth_per_class");
  sc.size = get_int("synth_size");
  sc.snr = get_double("synth_snr");
  sc.seed = get_u64("seed");
  sc.validate();
  return sc;
}

MaskOptions RunConfig::mask_options() const {
  MaskOptions mo;
  const auto& src = get("mask_source");
  if (src == "file") {
    mo.kind = MaskOptions::Kind::File;
  } else if (src == "landcover") {
    mo.kind = MaskOptions::Kind::LandCover;
    mo.relevant_codes = get_int_set("landcover_codes");
    if (get("code_book").empty()) throw Error("mask_source=landcover requires code_book");
    mo.code_book = load_code_book(get("code_book"));
    if (mo.relevant_codes.empty()) throw Error("mask_source=landcover requires landcover_codes");
  } else {
    throw Error("unknown mask_source '" + src + "' (expected file or landcover)");
  }
  return mo;
}

}  // namespace geofuse
