#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "matword/common.hpp"
#include "matword/model.hpp"

namespace matword {

// Little-endian layout:
//   "CMSM" | version u32 | mode u8 | d1 u32 | d2 u32 | m u64
//   m × (length u32, UTF-8 bytes)
//   input table(s) as f32, id order, each word's matrix row-major
//   has_output u8 | [m × dimension f32]
inline constexpr char kModelMagic[4] = {'C', 'M', 'S', 'M'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

struct ModelFile {
  Model<float> model;
  std::vector<std::string> tokens;

  bool has_output() const noexcept { return model.output.rows() != 0; }
  bool operator==(const ModelFile&) const = default;
};

namespace detail {

class LeWriter {
 public:
  explicit LeWriter(std::ostream& out) : out_(out) {}

  template <class U>
  void put(U value) {
    using Bits = std::conditional_t<sizeof(U) == 8, std::uint64_t,
                                    std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint8_t>>;
    const auto bits = std::bit_cast<Bits>(value);
    char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out_.write(bytes, sizeof(U));
  }

  void put_bytes(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }

  void put_floats(std::span<const float> values) {
    if constexpr (std::endian::native == std::endian::little) {
      put_bytes(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(float));
    } else {
      for (float v : values) put(v);
    }
  }

 private:
  std::ostream& out_;
};

class LeReader {
 public:
  explicit LeReader(std::istream& in) : in_(in) {}

  template <class U>
  U get() {
    using Bits = std::conditional_t<sizeof(U) == 8, std::uint64_t,
                                    std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint8_t>>;
    unsigned char bytes[sizeof(U)];
    read(reinterpret_cast<char*>(bytes), sizeof(U));
    Bits bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<Bits>(bytes[i]) << (8 * i);
    return std::bit_cast<U>(bits);
  }

  void read(char* dst, std::size_t n) {
    if (!in_.read(dst, static_cast<std::streamsize>(n))) throw FormatError("model file: truncated");
  }

  void get_floats(std::span<float> values) {
    if constexpr (std::endian::native == std::endian::little) {
      read(reinterpret_cast<char*>(values.data()), values.size() * sizeof(float));
    } else {
      for (auto& v : values) v = get<float>();
    }
  }

 private:
  std::istream& in_;
};

inline std::optional<std::uint64_t> remaining_bytes(std::istream& in) {
  const auto here = in.tellg();
  if (here < 0) return std::nullopt;
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  in.seekg(here);
  if (end < here) return std::nullopt;
  return static_cast<std::uint64_t>(end - here);
}

}  // namespace detail

inline void write_model(std::ostream& out, const ModelFile& file) {
  const auto& model = file.model;
  model.spec.validate();
  const std::size_t m = model.vocab_size();
  if (file.tokens.size() != m) throw InvalidArgument("write_model: token count does not match the tables");
  if (!model.all_finite()) throw NumericError("write_model: non-finite weights");
  detail::LeWriter w(out);
  w.put_bytes(kModelMagic, 4);
  w.put(kModelFormatVersion);
  w.put(static_cast<std::uint8_t>(model.spec.mode));
  w.put(static_cast<std::uint32_t>(model.spec.d1));
  w.put(static_cast<std::uint32_t>(model.spec.mode == Mode::Hybrid ? model.spec.d2 : 0));
  w.put(static_cast<std::uint64_t>(m));
  for (const auto& tok : file.tokens) {
    w.put(static_cast<std::uint32_t>(tok.size()));
    w.put_bytes(tok.data(), tok.size());
  }
  for (const auto& table : model.inputs) w.put_floats(table.data());
  const bool has_output = file.has_output();
  w.put(static_cast<std::uint8_t>(has_output ? 1 : 0));
  if (has_output) {
    if (model.output.rows() != m || model.output.width() != model.spec.dimension())
      throw InvalidArgument("write_model: output table shape mismatch");
    w.put_floats(model.output.data());
  }
  if (!out) throw IoError("write_model: write failed");
}

inline ModelFile read_model(std::istream& in) {
  detail::LeReader r(in);
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kModelMagic, 4) != 0) throw FormatError("model file: bad magic");
  if (const auto version = r.get<std::uint32_t>(); version != kModelFormatVersion)
    throw FormatError("model file: unsupported version " + std::to_string(version));
  const auto mode = r.get<std::uint8_t>();
  if (mode > 2) throw FormatError("model file: bad mode " + std::to_string(mode));
  ModelFile file;
  auto& spec = file.model.spec;
  spec.mode = static_cast<Mode>(mode);
  spec.d1 = r.get<std::uint32_t>();
  spec.d2 = r.get<std::uint32_t>();
  const auto m = r.get<std::uint64_t>();
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
  constexpr std::uint64_t kMaxSide = 4096;
  constexpr std::uint64_t kMaxRows = std::uint64_t{1} << 32;
  if (spec.d1 > kMaxSide || spec.d2 > kMaxSide || m == 0 || m >= kMaxRows)
    throw FormatError("model file: implausible dimensions");

  std::string tok;
  for (std::uint64_t i = 0; i < m; ++i) {
    const auto len = r.get<std::uint32_t>();
    if (len > (1u << 20)) throw FormatError("model file: implausible token length");
    tok.resize(len);
    r.read(tok.data(), len);
    file.tokens.push_back(tok);
  }
  if (const auto left = detail::remaining_bytes(in)) {
    std::uint64_t need = 0;
    for (std::size_t t = 0; t < spec.table_count(); ++t) need += m * spec.side(t) * spec.side(t) * sizeof(float);
    if (need + 1 > *left) throw FormatError("model file: truncated");
  }
  for (std::size_t t = 0; t < spec.table_count(); ++t) {
    WordMatrixTable<float> table(m, spec.side(t));
    r.get_floats(table.data());
    if (!table.all_finite()) throw FormatError("model file: non-finite input weights");
    file.model.inputs.push_back(std::move(table));
  }
  const auto has_output = r.get<std::uint8_t>();
  if (has_output > 1) throw FormatError("model file: bad output flag");
  if (has_output) {
    file.model.output = OutputTable<float>(m, spec.dimension());
    r.get_floats(file.model.output.data());
    if (!file.model.output.all_finite()) throw FormatError("model file: non-finite output weights");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("model file: trailing bytes");
  return file;
}

inline void save_model(const std::filesystem::path& path, const ModelFile& file) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write model '" + path.string() + "'");
  write_model(out, file);
}

inline ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read model '" + path.string() + "'");
  return read_model(in);
}

}  // namespace matword
