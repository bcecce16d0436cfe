#include "vega/checkpoint.hpp"

#include <algorithm>
#include <map>

#include "vega/error.hpp"
#include "vega/tensor_io.hpp"

namespace vega {

namespace {

constexpr std::string_view kMagic = "VEGC";

void put_halves(std::vector<double>& out, std::uint64_t v) {
  out.push_back(static_cast<double>(v & 0xffffffffULL));
  out.push_back(static_cast<double>(v >> 32));
}

std::uint64_t take_halves(const Tensor& t, std::size_t at, const std::string& context) {
  const double lo = t[at], hi = t[at + 1];
  auto ok = [](double x) { return x >= 0.0 && x < 4294967296.0 && x == static_cast<double>(static_cast<std::uint64_t>(x)); };
  if (!ok(lo) || !ok(hi)) throw ValidationError(context + ": corrupt integer field");
  return static_cast<std::uint64_t>(lo) | (static_cast<std::uint64_t>(hi) << 32);
}

Tensor vector_tensor(const std::vector<double>& v) { return Tensor({v.size()}, v); }

class SectionWriter {
 public:
  void add(const std::string& name, const Tensor& t) { sections_.emplace_back(name, io::encode_tensor(t, io::Precision::f64)); }
  std::string finish() const {
    std::string out(kMagic);
    io::put_u32(out, kCheckpointVersion);
    io::put_u32(out, static_cast<std::uint32_t>(sections_.size()));
    for (const auto& [name, payload] : sections_) {
      io::put_u32(out, static_cast<std::uint32_t>(name.size()));
      out += name;
      io::put_u64(out, payload.size());
      out += payload;
    }
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> sections_;
};

class SectionReader {
 public:
  SectionReader(std::string_view bytes, std::string context) : context_(std::move(context)) {
    if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
      throw ValidationError(context_ + ": not a checkpoint (bad magic)");
    }
    bytes.remove_prefix(kMagic.size());
    const std::uint32_t version = io::take_u32(bytes, context_);
    if (version != kCheckpointVersion) {
      throw ValidationError(context_ + ": unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t count = io::take_u32(bytes, context_);
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint32_t name_len = io::take_u32(bytes, context_);
      if (bytes.size() < name_len) throw ValidationError(context_ + ": truncated section name");
      std::string name(bytes.substr(0, name_len));
      bytes.remove_prefix(name_len);
      const std::uint64_t len = io::take_u64(bytes, context_);
      if (bytes.size() < len) throw ValidationError(context_ + ": truncated section '" + name + "'");
      Tensor t = io::decode_tensor(bytes.substr(0, len), context_ + " section '" + name + "'");
      bytes.remove_prefix(len);
      if (!sections_.emplace(name, std::move(t)).second) {
        throw ValidationError(context_ + ": duplicate section '" + name + "'");
      }
    }
    if (!bytes.empty()) throw ValidationError(context_ + ": trailing bytes after the last section");
  }

  bool has(const std::string& name) const { return sections_.count(name) != 0; }

  Tensor take(const std::string& name) {
    auto it = sections_.find(name);
    if (it == sections_.end()) throw ValidationError(context_ + ": missing section '" + name + "'");
    Tensor t = std::move(it->second);
    sections_.erase(it);
    return t;
  }

  void fill(const std::string& name, Tensor& dst) {
    Tensor src = take(name);
    if (src.shape() != dst.shape()) {
      throw ValidationError(context_ + ": section '" + name + "' has shape " + shape_string(src.shape()) +
                            ", expected " + shape_string(dst.shape()));
    }
    std::copy(src.values().begin(), src.values().end(), dst.values().begin());
  }

  void finish() const {
    if (!sections_.empty()) throw ValidationError(context_ + ": unexpected section '" + sections_.begin()->first + "'");
  }

  const std::string& context() const { return context_; }

 private:
  std::string context_;
  std::map<std::string, Tensor> sections_;
};

template <class Params>
std::vector<std::pair<std::string, const Tensor*>> prefixed(const Params& p, const std::string& prefix) {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (const auto& [name, t] : p.named()) out.emplace_back(prefix + name, t);
  return out;
}

}  // namespace

bool TrainState::operator==(const TrainState& o) const {
  auto same = [](const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](const Tensor& x, const Tensor& y) {
             return x.bit_equal(y);
           });
  };
  return step == o.step && adam_steps == o.adam_steps && rng == o.rng && interval == o.interval &&
         same(adam_m, o.adam_m) && same(adam_v, o.adam_v);
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  SectionWriter w;
  const EncoderConfig& c = ckpt.encoder.config;
  std::vector<double> cfg = {static_cast<double>(c.image_size), static_cast<double>(c.patch_size),
                             static_cast<double>(c.channels),   static_cast<double>(c.embed_dim),
                             static_cast<double>(c.num_blocks), static_cast<double>(c.num_heads),
                             static_cast<double>(c.mlp_ratio)};
  put_halves(cfg, c.seed);
  w.add("encoder_config", vector_tensor(cfg));
  w.add("flags", vector_tensor({ckpt.encoder.frozen ? 1.0 : 0.0, ckpt.head ? 1.0 : 0.0, ckpt.projector ? 1.0 : 0.0,
                                ckpt.state ? 1.0 : 0.0}));
  for (const auto& [name, t] : prefixed(ckpt.encoder, "encoder.")) w.add(name, *t);
  if (ckpt.head) {
    w.add("head.shape", vector_tensor({static_cast<double>(ckpt.head->w1.dim(1)),
                                       static_cast<double>(ckpt.head->action_dim())}));
    for (const auto& [name, t] : prefixed(*ckpt.head, "head.")) w.add(name, *t);
  }
  if (ckpt.projector) {
    for (const auto& [name, t] : prefixed(*ckpt.projector, "projector.")) w.add(name, *t);
  }
  if (ckpt.state) {
    const TrainState& s = *ckpt.state;
    if (s.adam_m.size() != s.adam_v.size()) throw ValidationError("checkpoint: optimizer moment lists differ in length");
    std::vector<double> ints;
    put_halves(ints, s.step);
    put_halves(ints, s.adam_steps);
    put_halves(ints, s.adam_m.size());
    w.add("step", vector_tensor(ints));
    std::vector<double> rng;
    for (std::uint64_t v : s.rng) put_halves(rng, v);
    w.add("rng", vector_tensor(rng));
    w.add("interval", vector_tensor({s.interval.begin(), s.interval.end()}));
    for (std::size_t i = 0; i < s.adam_m.size(); ++i) {
      w.add("adam.m." + std::to_string(i), s.adam_m[i]);
      w.add("adam.v." + std::to_string(i), s.adam_v[i]);
    }
  }
  return w.finish();
}

Checkpoint decode_checkpoint(std::string_view bytes, const std::string& context) {
  SectionReader r(bytes, context);
  const Tensor cfg = r.take("encoder_config");
  if (cfg.shape() != Shape{9}) throw ValidationError(context + ": malformed encoder_config section");
  auto count = [&](std::size_t i) {
    const double v = cfg[i];
    if (!(v >= 0.0 && v < 1e9) || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw ValidationError(context + ": malformed encoder_config section");
    }
    return static_cast<std::size_t>(v);
  };
  EncoderConfig c;
  c.image_size = count(0);
  c.patch_size = count(1);
  c.channels = count(2);
  c.embed_dim = count(3);
  c.num_blocks = count(4);
  c.num_heads = count(5);
  c.mlp_ratio = count(6);
  c.seed = take_halves(cfg, 7, context);
  c.validate();

  const Tensor flags = r.take("flags");
  if (flags.shape() != Shape{4}) throw ValidationError(context + ": malformed flags section");
  auto flag = [&](std::size_t i) {
    if (flags[i] != 0.0 && flags[i] != 1.0) throw ValidationError(context + ": malformed flags section");
    return flags[i] == 1.0;
  };

  Checkpoint ckpt;
  ckpt.encoder = init_encoder(c);
  for (auto& [name, t] : ckpt.encoder.named()) r.fill("encoder." + name, *t);
  if (flag(0)) ckpt.encoder.freeze();

  if (flag(1)) {
    const Tensor shape = r.take("head.shape");
    if (shape.shape() != Shape{2} || !(shape[0] >= 1.0 && shape[1] >= 1.0)) {
      throw ValidationError(context + ": malformed head.shape section");
    }
    ckpt.head = init_action_head(c.embed_dim, static_cast<std::size_t>(shape[1]), 0, static_cast<std::size_t>(shape[0]));
    for (auto& [name, t] : ckpt.head->named()) r.fill("head." + name, *t);
  }
  if (flag(2)) {
    ckpt.projector = init_projector(c.embed_dim, 0);
    for (auto& [name, t] : ckpt.projector->named()) r.fill("projector." + name, *t);
  }
  if (flag(3)) {
    TrainState s;
    const Tensor ints = r.take("step");
    if (ints.shape() != Shape{6}) throw ValidationError(context + ": malformed step section");
    s.step = take_halves(ints, 0, context);
    s.adam_steps = take_halves(ints, 2, context);
    const std::uint64_t slots = take_halves(ints, 4, context);
    const Tensor rng = r.take("rng");
    if (rng.shape() != Shape{8}) throw ValidationError(context + ": malformed rng section");
    for (std::size_t i = 0; i < 4; ++i) s.rng[i] = take_halves(rng, 2 * i, context);
    const Tensor interval = r.take("interval");
    if (interval.shape() != Shape{4}) throw ValidationError(context + ": malformed interval section");
    std::copy(interval.values().begin(), interval.values().end(), s.interval.begin());
    for (std::uint64_t i = 0; i < slots; ++i) {
      s.adam_m.push_back(r.take("adam.m." + std::to_string(i)));
      s.adam_v.push_back(r.take("adam.v." + std::to_string(i)));
    }
    ckpt.state = std::move(s);
  }
  r.finish();
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  io::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

Checkpoint inference_checkpoint(const Checkpoint& ckpt) {
  Checkpoint out;
  out.encoder = ckpt.encoder;
  out.head = ckpt.head;
  return out;
}

}  // namespace vega
