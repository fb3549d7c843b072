#include "jmee/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace jmee {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

std::size_t ParamStore::add(std::string name, Tensor init) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name " + name);
  const std::size_t id = params_.size();
  index_.emplace(name, id);
  params_.push_back({std::move(name), std::move(init)});
  return id;
}

std::size_t ParamStore::slot(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return it->second;
}

std::size_t ParamStore::element_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

double ParamStore::squared_norm() const {
  double acc = 0;
  for (const auto& p : params_)
    for (double v : p.value.data()) acc += v * v;
  return acc;
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = params_[i];
    const auto& b = other.params_[i];
    if (a.name != b.name || a.value.shape() != b.value.shape()) return false;
    if (std::memcmp(a.value.data().data(), b.value.data().data(),
                    a.value.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

ad::Var ParamBinder::operator()(std::size_t slot) {
  ad::Var& v = bound_.at(slot);
  if (!v.valid()) v = tape_.parameter(store_[slot].value, slot);
  return v;
}

GradientBuffer::GradientBuffer(const ParamStore& store) {
  grads_.reserve(store.size());
  for (const auto& p : store) grads_.emplace_back(p.value.shape(), 0.0);
}

void GradientBuffer::accumulate(const ad::Tape& tape) {
  tape.for_each_parameter_grad([this](std::size_t slot, const Tensor& g) {
    auto dst = grads_.at(slot).data();
    const auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  });
}

void GradientBuffer::add(const GradientBuffer& other) {
  for (std::size_t s = 0; s < grads_.size(); ++s) {
    auto dst = grads_[s].data();
    const auto src = other.grads_[s].data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

void GradientBuffer::zero() {
  for (auto& g : grads_) g.fill(0.0);
}

bool GradientBuffer::all_finite() const {
  for (const auto& g : grads_)
    if (!g.all_finite()) return false;
  return true;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'J', 'M', 'E', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in, const std::string& what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw std::runtime_error("truncated checkpoint while reading " + what);
  return v;
}

std::string take_bytes(std::istream& in, std::size_t n, const std::string& what) {
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n)))
    throw std::runtime_error("truncated checkpoint while reading " + what);
  return s;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const std::string& header,
                      const ParamStore& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  put<std::uint64_t>(out, params.size());
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(p.value.data().data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("write failed for checkpoint " + path.string());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error(path.string() + " is not a checkpoint file");
  if (take<std::uint32_t>(in, "version") != kVersion)
    throw std::runtime_error(path.string() + ": unsupported checkpoint version");
  CheckpointData data;
  data.header = take_bytes(in, take<std::uint64_t>(in, "header length"), "header");
  const auto count = take<std::uint64_t>(in, "parameter count");
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = take_bytes(in, take<std::uint32_t>(in, "name length"), "name");
    const auto rank = take<std::uint32_t>(in, "rank");
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(take<std::uint64_t>(in, "shape"));
    Tensor t(shape);
    if (!in.read(reinterpret_cast<char*>(t.data().data()),
                 static_cast<std::streamsize>(t.size() * sizeof(double))))
      throw std::runtime_error("truncated checkpoint in values of " + name);
    data.params.add(std::move(name), std::move(t));
  }
  return data;
}

}  // namespace jmee
