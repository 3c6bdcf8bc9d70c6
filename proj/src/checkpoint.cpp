#include "softcast/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "softcast/error.hpp"

namespace softcast {

namespace {

constexpr const char* kMagic = "softcast-checkpoint";

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void put_f32(std::string& out, float f) {
  auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

float get_f32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const auto& cfg = ckpt.params.config();
  std::ostringstream h;
  h << kMagic << ' ' << kCheckpointVersion << '\n';
  h << "V " << cfg.V << '\n';
  h << "d " << cfg.d << '\n';
  h << "n_layers " << cfg.n_layers << '\n';
  h << "n_heads " << cfg.n_heads << '\n';
  h << "max_len " << cfg.max_len << '\n';
  h << "ff_mult " << cfg.ff_mult << '\n';
  h << "token_V " << ckpt.spec.V << '\n';
  h << "token_lo " << fmt_double(ckpt.spec.lo) << '\n';
  h << "token_hi " << fmt_double(ckpt.spec.hi) << '\n';
  h << "mu_min " << fmt_double(ckpt.ranges.mu_min) << '\n';
  h << "mu_max " << fmt_double(ckpt.ranges.mu_max) << '\n';
  h << "sigma_min " << fmt_double(ckpt.ranges.sigma_min) << '\n';
  h << "sigma_max " << fmt_double(ckpt.ranges.sigma_max) << '\n';
  h << "history " << ckpt.history << '\n';
  h << "horizon " << ckpt.horizon << '\n';
  h << "tensors " << ckpt.params.tensors().size() << '\n';
  for (const auto& t : ckpt.params.tensors()) {
    h << "tensor " << t.name << ' ' << t.shape.size();
    for (auto s : t.shape) h << ' ' << s;
    h << '\n';
  }
  h << "data\n";
  std::string out = h.str();
  out.reserve(out.size() + 4 * ckpt.params.parameter_count());
  for (const auto& t : ckpt.params.tensors())
    for (float f : t.data) put_f32(out, f);
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  std::size_t pos = 0, line_no = 0;
  auto next_line = [&]() -> std::string {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw ParseError("checkpoint: truncated header", line_no + 1);
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    return line;
  };
  auto expect = [&](const std::string& key) -> std::string {
    std::string line = next_line();
    std::istringstream is(line);
    std::string k, v;
    is >> k >> v;
    if (k != key || v.empty())
      throw ParseError("checkpoint: expected '" + key + "', got '" + line + "'", line_no);
    return v;
  };
  auto as_int = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ParseError("checkpoint: bad integer '" + s + "'", line_no);
    }
  };
  auto as_double = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ParseError("checkpoint: bad number '" + s + "'", line_no);
    }
  };

  const std::string magic = expect(kMagic);
  if (as_int(magic) != kCheckpointVersion)
    throw ValidationError("checkpoint: unsupported format version " + magic + " (this build reads " +
                          std::to_string(kCheckpointVersion) + ")");
  ModelConfig cfg;
  cfg.V = as_int(expect("V"));
  cfg.d = as_int(expect("d"));
  cfg.n_layers = as_int(expect("n_layers"));
  cfg.n_heads = as_int(expect("n_heads"));
  cfg.max_len = as_int(expect("max_len"));
  cfg.ff_mult = as_int(expect("ff_mult"));
  const int token_v = as_int(expect("token_V"));
  const double lo = as_double(expect("token_lo"));
  const double hi = as_double(expect("token_hi"));
  Checkpoint ck;
  ck.ranges.mu_min = as_double(expect("mu_min"));
  ck.ranges.mu_max = as_double(expect("mu_max"));
  ck.ranges.sigma_min = as_double(expect("sigma_min"));
  ck.ranges.sigma_max = as_double(expect("sigma_max"));
  ck.history = as_int(expect("history"));
  ck.horizon = as_int(expect("horizon"));
  const int n_tensors = as_int(expect("tensors"));

  try {
    ck.params = ModelParams<float>(cfg);
    ck.spec = make_token_spec(token_v, lo, hi);
  } catch (const ConfigError& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
  if (token_v != cfg.V) throw ValidationError("checkpoint: token V differs from model V");
  auto& tensors = ck.params.tensors();
  if (n_tensors != static_cast<int>(tensors.size()))
    throw ValidationError("checkpoint: tensor count " + std::to_string(n_tensors) + " does not match " +
                          std::to_string(tensors.size()) + " expected for this configuration");
  for (auto& t : tensors) {
    const std::string line = next_line();
    std::istringstream is(line);
    std::string kw, name;
    std::size_t rank = 0;
    is >> kw >> name >> rank;
    std::vector<std::size_t> shape(rank);
    for (auto& s : shape) is >> s;
    if (kw != "tensor" || !is) throw ParseError("checkpoint: bad tensor line '" + line + "'", line_no);
    if (name != t.name || shape != t.shape)
      throw ValidationError("checkpoint: tensor '" + name + "' does not match expected '" + t.name + "'");
  }
  if (next_line() != "data") throw ParseError("checkpoint: expected 'data'", line_no);

  const std::size_t need = 4 * ck.params.parameter_count();
  if (bytes.size() - pos != need)
    throw ValidationError("checkpoint: payload has " + std::to_string(bytes.size() - pos) +
                          " bytes, expected " + std::to_string(need));
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (auto& t : tensors)
    for (auto& f : t.data) {
      f = get_f32(p);
      p += 4;
    }
  if (!ck.params.all_finite()) throw ValidationError("checkpoint: non-finite parameter values");
  return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  // Write to a temporary and rename so a crash never leaves a torn file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write checkpoint: " + path);
    const std::string bytes = serialize_checkpoint(ckpt);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ConfigError("failed writing checkpoint: " + path);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace softcast
