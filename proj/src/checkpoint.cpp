#include "adap/checkpoint.hpp"

#include "adap/errors.hpp"

#include <boost/crc.hpp>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace adap {

namespace {

constexpr std::array<char, 8> kMagic{'A', 'D', 'A', 'P', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void matrix(const Matrix& m) {
    // Column-major element order.
    for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
  }
  const std::string& data() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw IntegrityError("checkpoint: truncated file");
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    const auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  void matrix(Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
  }
  std::size_t position() const { return pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32(std::string_view data) {
  boost::crc_32_type crc;
  crc.process_bytes(data.data(), data.size());
  return crc.checksum();
}

}  // namespace

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const GeneratorConfig& g = ckpt.generator.config();
  Writer w;
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(g.architecture));
  w.u32(static_cast<std::uint32_t>(g.latent_dim));
  w.u32(static_cast<std::uint32_t>(g.hidden_dim));
  w.u32(static_cast<std::uint32_t>(g.hidden_layers));
  w.u32(static_cast<std::uint32_t>(g.observation_size));
  w.u32(static_cast<std::uint32_t>(g.action_count));
  w.u32(static_cast<std::uint32_t>(g.policy_activation));
  w.u32(static_cast<std::uint32_t>(g.value_activation));

  const std::vector<const Matrix*> params = ckpt.generator.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const Matrix* p : params) {
    w.u32(static_cast<std::uint32_t>(p->rows()));
    w.u32(static_cast<std::uint32_t>(p->cols()));
  }
  for (const Matrix* p : params) w.matrix(*p);

  const auto moments = ckpt.optimizer.first.size();
  if (moments != 0 && (moments != params.size() || ckpt.optimizer.second.size() != moments)) {
    throw IntegrityError("checkpoint: optimizer moments do not match the parameter list");
  }
  w.u32(static_cast<std::uint32_t>(moments));
  for (const Matrix& m : ckpt.optimizer.first) w.matrix(m);
  for (const Matrix& m : ckpt.optimizer.second) w.matrix(m);
  w.i64(ckpt.optimizer.step);
  w.i64(ckpt.iteration);
  w.i64(ckpt.agent_steps);
  const std::string meta = ckpt.metadata.is_null() ? std::string("null") : ckpt.metadata.dump();
  w.u32(static_cast<std::uint32_t>(meta.size()));
  w.bytes(meta.data(), meta.size());

  std::string data = w.data();
  Writer tail;
  tail.u32(crc32(data));
  data += tail.data();
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IntegrityError("checkpoint: write failed");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  // Write to a sibling then rename so a crash never leaves a torn file.
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IntegrityError("checkpoint: cannot open '" + tmp + "' for writing");
    save_checkpoint(out, ckpt);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(std::istream& in) {
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < kMagic.size() + 8) throw IntegrityError("checkpoint: truncated file");
  if (std::memcmp(data.data(), kMagic.data(), kMagic.size()) != 0) throw IntegrityError("checkpoint: bad magic");
  const std::string_view body(data.data(), data.size() - 4);
  Reader crc_reader(std::string_view(data).substr(data.size() - 4));
  if (crc_reader.u32() != crc32(body)) throw IntegrityError("checkpoint: checksum mismatch");

  Reader r(body);
  r.bytes(kMagic.size());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw IntegrityError("checkpoint: unsupported format version " + std::to_string(version));
  }
  GeneratorConfig g;
  const std::uint32_t arch = r.u32();
  if (arch > 1) throw IntegrityError("checkpoint: unknown architecture tag " + std::to_string(arch));
  g.architecture = static_cast<Architecture>(arch);
  g.latent_dim = static_cast<int>(r.u32());
  g.hidden_dim = static_cast<int>(r.u32());
  g.hidden_layers = static_cast<int>(r.u32());
  g.observation_size = static_cast<int>(r.u32());
  g.action_count = static_cast<int>(r.u32());
  const std::uint32_t pa = r.u32();
  const std::uint32_t va = r.u32();
  if (pa > 2 || va > 2) throw IntegrityError("checkpoint: unknown activation tag");
  g.policy_activation = static_cast<Activation>(pa);
  g.value_activation = static_cast<Activation>(va);

  Checkpoint ckpt;
  Rng rng(0);
  try {
    ckpt.generator = PolicyGenerator(g, rng);
  } catch (const ConfigError& e) {
    throw IntegrityError(std::string("checkpoint: bad header: ") + e.what());
  }
  const std::vector<Matrix*> params = ckpt.generator.parameters();
  if (r.u32() != params.size()) throw IntegrityError("checkpoint: tensor count does not match the architecture");
  for (Matrix* p : params) {
    const auto rows = r.u32();
    const auto cols = r.u32();
    if (rows != p->rows() || cols != p->cols()) throw IntegrityError("checkpoint: layer shape mismatch");
  }
  for (Matrix* p : params) r.matrix(*p);

  const std::uint32_t moments = r.u32();
  if (moments != 0 && moments != params.size()) throw IntegrityError("checkpoint: optimizer moment count mismatch");
  for (auto* bank : {&ckpt.optimizer.first, &ckpt.optimizer.second}) {
    for (std::uint32_t i = 0; i < moments; ++i) {
      Matrix m(params[i]->rows(), params[i]->cols());
      r.matrix(m);
      bank->push_back(std::move(m));
    }
  }
  ckpt.optimizer.step = r.i64();
  ckpt.iteration = r.i64();
  ckpt.agent_steps = r.i64();
  const std::uint32_t meta_len = r.u32();
  const std::string_view meta = r.bytes(meta_len);
  try {
    ckpt.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception&) {
    throw IntegrityError("checkpoint: corrupt metadata");
  }
  if (r.position() != body.size()) throw IntegrityError("checkpoint: trailing bytes");
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("checkpoint: cannot open '" + path.string() + "'");
  return load_checkpoint(in);
}

}  // namespace adap
