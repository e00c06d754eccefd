#include "actseg/checkpoint.hpp"

#include <fstream>
#include <map>

#include "actseg/binary_io.hpp"
#include "actseg/error.hpp"

namespace actseg {

namespace {

constexpr char kMagic[4] = {'S', 'S', 'A', 'M'};
constexpr std::uint32_t kVersion = 1;

ParamArray read_param_array(binio::Reader& in) {
  ParamArray p;
  const std::uint32_t name_len = in.u32();
  if (name_len > 4096) in.fail("implausible array name length");
  p.name = in.str(name_len);
  const std::uint32_t rank = in.u32();
  if (rank > 8) in.fail("implausible rank for '" + p.name + "'");
  for (std::uint32_t i = 0; i < rank; ++i) p.shape.push_back(in.u64());
  const std::size_t count = shape_size(p.shape);
  if (count > (std::size_t{1} << 32)) in.fail("implausible size for '" + p.name + "'");
  p.values.resize(count);
  for (auto& v : p.values) v = in.f64();
  p.grad.assign(count, 0.0);
  return p;
}

}  // namespace

void write_param_array(std::ostream& os, const ParamArray& p) {
  binio::put_u32(os, static_cast<std::uint32_t>(p.name.size()));
  binio::put_bytes(os, p.name);
  binio::put_u32(os, static_cast<std::uint32_t>(p.shape.size()));
  for (auto d : p.shape) binio::put_u64(os, d);
  for (double v : p.values) binio::put_f64(os, v);
}

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  const ModelConfig& c = ckpt.params.config;
  os.write(kMagic, 4);
  binio::put_u32(os, kVersion);
  binio::put_u32(os, static_cast<std::uint32_t>(c.num_actions));
  binio::put_u32(os, static_cast<std::uint32_t>(c.num_rules));
  binio::put_u32(os, static_cast<std::uint32_t>(c.state_dim));
  binio::put_u32(os, static_cast<std::uint32_t>(c.feature_dim));
  binio::put_u32(os, static_cast<std::uint32_t>(c.hidden_dims.size()));
  for (auto h : c.hidden_dims) binio::put_u32(os, static_cast<std::uint32_t>(h));
  binio::put_f64(os, c.temperature);
  binio::put_u8(os, static_cast<std::uint8_t>(c.activation));
  binio::put_u8(os, c.hard_transition ? 1 : 0);
  binio::put_u32(os, static_cast<std::uint32_t>(c.cross_projection_dim));
  binio::put_u32(os, ckpt.epoch);
  binio::put_f64(os, ckpt.temperature);
  const auto arrays = ckpt.params.all_params();
  binio::put_u32(os, static_cast<std::uint32_t>(arrays.size() + ckpt.extras.size()));
  for (const ParamArray* p : arrays) write_param_array(os, *p);
  for (const ParamArray& p : ckpt.extras) write_param_array(os, p);
  if (!os) throw FormatError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& is) {
  binio::Reader in(is, "checkpoint");
  char magic[4];
  in.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) throw FormatError("checkpoint: bad magic");
  const std::uint32_t version = in.u32();
  if (version != kVersion) in.fail("unsupported version " + std::to_string(version));

  ModelConfig c;
  c.num_actions = in.u32();
  c.num_rules = in.u32();
  c.state_dim = in.u32();
  c.feature_dim = in.u32();
  const std::uint32_t n_hidden = in.u32();
  if (n_hidden > 64) in.fail("implausible hidden layer count");
  c.hidden_dims.clear();
  for (std::uint32_t i = 0; i < n_hidden; ++i) c.hidden_dims.push_back(in.u32());
  c.temperature = in.f64();
  const std::uint8_t act = in.u8();
  if (act > static_cast<std::uint8_t>(Activation::kRelu)) in.fail("bad activation tag");
  c.activation = static_cast<Activation>(act);
  c.hard_transition = in.u8() != 0;
  c.cross_projection_dim = in.u32();
  try {
    c.validate();
  } catch (const ParameterError& e) {
    in.fail(std::string("invalid model config: ") + e.what());
  }

  Checkpoint ckpt;
  ckpt.epoch = in.u32();
  ckpt.temperature = in.f64();
  const std::uint32_t count = in.u32();

  // Rebuild a correctly shaped model, then fill it by name.
  Rng scratch(0);
  ckpt.params = init_model(c, scratch);
  auto slots = ckpt.params.all_params();
  std::map<std::string, ParamArray*> by_name;
  for (ParamArray* p : slots) by_name[p->name] = p;
  std::size_t filled = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    ParamArray p = read_param_array(in);
    auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      ckpt.extras.push_back(std::move(p));
      continue;
    }
    if (it->second->shape != p.shape) in.fail("shape mismatch for '" + p.name + "'");
    it->second->values = std::move(p.values);
    by_name.erase(it);
    ++filled;
  }
  if (filled != slots.size()) in.fail("missing model arrays");
  for (ParamArray* p : slots) p->check_finite();
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open '" + path.string() + "' for writing");
  write_checkpoint(os, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(is);
}

}  // namespace actseg
