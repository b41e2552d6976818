#include "geofuse/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "geofuse/config.hpp"
#include "geofuse/error.hpp"

namespace geofuse {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

Checkpoint snapshot(const FusionModel<float>& model, const ChannelStats& stats, std::uint64_t seed,
                    std::uint64_t steps) {
  Checkpoint c;
  c.model = model.config();
  c.stats = stats;
  c.seed = seed;
  c.steps = steps;
  for (const auto& p : model.params().params()) {
    NamedArray a;
    a.name = p.name;
    a.rows = static_cast<int>(p.value.rows());
    a.cols = static_cast<int>(p.value.cols());
    a.values.assign(p.value.data(), p.value.data() + p.value.size());
    c.params.push_back(std::move(a));
  }
  return c;
}

FusionModel<float> restore(const Checkpoint& ckpt) {
  FusionModel<float> model(ckpt.model, ckpt.seed);
  auto& params = model.params().params();
  if (params.size() != ckpt.params.size()) {
    throw Error("checkpoint holds " + std::to_string(ckpt.params.size()) + " arrays, model expects " +
                std::to_string(params.size()));
  }
  std::size_t i = 0;
  for (auto& p : params) {
    const auto& a = ckpt.params[i++];
    if (a.name != p.name || a.rows != p.value.rows() || a.cols != p.value.cols()) {
      throw Error("checkpoint array '" + a.name + "' does not match model parameter '" + p.name + "'");
    }
    std::memcpy(p.value.data(), a.values.data(), a.values.size() * sizeof(float));
  }
  return model;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  RunConfig rc;
  set_model_config(rc, ckpt.model);
  std::string out(kCheckpointMagic);
  out += "\n[config]\n";
  out += rc.echo(model_config_keys());
  out += "[meta]\nseed = " + std::to_string(ckpt.seed) + "\nsteps = " + std::to_string(ckpt.steps) + "\n";
  out += format_stats(ckpt.stats);
  out += "[params]\ncount = " + std::to_string(ckpt.params.size()) + "\n";
  for (const auto& a : ckpt.params) {
    out += a.name + " " + std::to_string(a.rows) + " " + std::to_string(a.cols) + "\n";
    out.append(reinterpret_cast<const char*>(a.values.data()), a.values.size() * sizeof(float));
    out += '\n';
  }
  out += "[end]\n";
  return out;
}

namespace {

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::string line() {
    const auto end = bytes_.find('\n', pos_);
    if (end == std::string::npos) throw Error("checkpoint: truncated file");
    std::string out = bytes_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return out;
  }

  void read(void* dst, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw Error("checkpoint: truncated parameter data");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  void expect(const std::string& what) {
    const auto got = line();
    if (got != what) throw Error("checkpoint: expected '" + what + "', found '" + got + "'");
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.line() != kCheckpointMagic) throw Error("checkpoint: bad magic header (expected GEOFUSE-CKPT-1)");
  r.expect("[config]");
  std::string config_text;
  for (std::string l = r.line(); l != "[meta]"; l = r.line()) config_text += l + "\n";
  Checkpoint c;
  c.model = RunConfig::parse(config_text, "checkpoint").model_config();
  std::string stats_text;
  for (std::string l = r.line(); l != "[params]"; l = r.line()) {
    if (l.rfind("seed = ", 0) == 0) {
      c.seed = std::stoull(l.substr(7));
    } else if (l.rfind("steps = ", 0) == 0) {
      c.steps = std::stoull(l.substr(8));
    } else {
      stats_text += l + "\n";
    }
  }
  c.stats = parse_stats(stats_text);
  const auto count_line = r.line();
  if (count_line.rfind("count = ", 0) != 0) throw Error("checkpoint: missing parameter count");
  const auto count = std::stoull(count_line.substr(8));
  for (std::size_t i = 0; i < count; ++i) {
    NamedArray a;
    std::istringstream hdr(r.line());
    if (!(hdr >> a.name >> a.rows >> a.cols) || a.rows < 0 || a.cols < 0) {
      throw Error("checkpoint: malformed parameter header");
    }
    a.values.resize(static_cast<std::size_t>(a.rows) * a.cols);
    r.read(a.values.data(), a.values.size() * sizeof(float));
    char nl;
    r.read(&nl, 1);
    if (nl != '\n') throw Error("checkpoint: corrupt parameter block '" + a.name + "'");
    c.params.push_back(std::move(a));
  }
  r.expect("[end]");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  out << serialize_checkpoint(ckpt);
  if (!out) throw Error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace geofuse
