#include "hmad/param_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

namespace hmad {

namespace {

template <class T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }
  std::uint64_t offset() const { return offset_; }

  void read(char* dst, std::size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError(std::string("parameter container truncated while reading ") + what +
                        " at byte " + std::to_string(offset_ + in_.gcount()));
    }
    offset_ += n;
  }

  template <class T>
  T get_le(const char* what) {
    std::array<unsigned char, sizeof(T)> bytes{};
    read(reinterpret_cast<char*>(bytes.data()), bytes.size(), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
    return v;
  }

 private:
  std::istream& in_;
  std::uint64_t offset_ = 0;
};

}  // namespace

void write_param_container(std::ostream& out, const std::vector<NamedTensor>& tensors) {
  out.write(kParamMagic, 8);
  for (const auto& [name, tensor] : tensors) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
    for (auto e : tensor.shape()) put_le<std::uint64_t>(out, e);
    for (double v : tensor.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw FormatError("failed writing parameter container");
}

std::vector<NamedTensor> read_param_container(std::istream& in) {
  Reader r(in);
  std::array<char, 8> magic{};
  r.read(magic.data(), magic.size(), "magic");
  if (std::memcmp(magic.data(), kParamMagic, 8) != 0) {
    throw FormatError("not a parameter container: bad magic at byte 0");
  }
  std::vector<NamedTensor> records;
  while (!r.at_end()) {
    const auto record_start = r.offset();
    const auto name_len = r.get_le<std::uint32_t>("name length");
    if (name_len > (1u << 16)) {
      throw FormatError("implausible name length at byte " + std::to_string(record_start));
    }
    std::string name(name_len, '\0');
    r.read(name.data(), name_len, "name");
    const auto rank = r.get_le<std::uint32_t>("rank");
    if (rank == 0 || rank > 8) {
      throw FormatError("invalid rank " + std::to_string(rank) + " for '" + name + "' at byte " +
                        std::to_string(record_start));
    }
    Shape shape(rank);
    std::uint64_t count = 1;
    for (auto& e : shape) {
      e = r.get_le<std::uint64_t>("extent");
      if (e == 0 || e > (1ull << 32)) {
        throw FormatError("invalid extent for '" + name + "' at byte " + std::to_string(r.offset()));
      }
      count *= e;
      if (count > (1ull << 32)) throw FormatError("tensor '" + name + "' is too large");
    }
    Vector data(count);
    for (auto& v : data) v = std::bit_cast<double>(r.get_le<std::uint64_t>("values"));
    records.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  return records;
}

std::vector<NamedTensor> to_records(const FusionParams& params) {
  const auto& g = params.geometry;
  std::vector<NamedTensor> records;
  records.push_back(
      {"geometry",
       Tensor({6}, {static_cast<double>(g.shallow_channels), static_cast<double>(g.shallow_height),
                    static_cast<double>(g.shallow_width), static_cast<double>(g.deep_channels),
                    static_cast<double>(g.deep_height), static_cast<double>(g.deep_width)})});
  visit_params(params, "", [&](const std::string& name, const Tensor& t) {
    records.push_back({name, t});
  });
  return records;
}

FusionParams from_records(const std::vector<NamedTensor>& records) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& r : records) {
    if (!by_name.emplace(r.name, &r.tensor).second) {
      throw FormatError("duplicate parameter record '" + r.name + "'");
    }
  }
  auto find = [&](const std::string& name) -> const Tensor& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("missing parameter record '" + name + "'");
    return *it->second;
  };

  const Tensor& geo = find("geometry");
  if (geo.shape() != Shape{6}) throw FormatError("geometry record must hold 6 values");
  auto extent = [&](std::size_t i) {
    const double v = geo[i];
    if (!(v >= 1.0) || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw FormatError("geometry record holds a non-positive or fractional extent");
    }
    return static_cast<std::size_t>(v);
  };
  const FeatureGeometry g{extent(0), extent(1), extent(2), extent(3), extent(4), extent(5)};

  const Tensor& hidden = find("attention.channel.mlp.hidden.weight");
  if (hidden.rank() != 2 || hidden.extent(0) == 0) {
    throw FormatError("malformed channel attention weight");
  }
  const std::size_t reduction = 2 * g.shallow_channels / hidden.extent(0);

  FusionParams params = FusionParams::seeded(g, 0, reduction);
  std::size_t used = 1;
  visit_params(params, "", [&](const std::string& name, Tensor& t) {
    const Tensor& stored = find(name);
    if (stored.shape() != t.shape()) {
      throw FormatError("parameter '" + name + "' has shape " + to_string(stored.shape()) +
                        ", expected " + to_string(t.shape()));
    }
    t = stored;
    ++used;
  });
  if (used != by_name.size()) throw FormatError("parameter container holds unknown records");
  params.validate();
  return params;
}

void save_fusion_params(const FusionParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_param_container(out, to_records(params));
}

FusionParams load_fusion_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return from_records(read_param_container(in));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace hmad
