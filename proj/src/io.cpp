#include "symreg/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

namespace symreg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Paths {
  fs::path header;
  fs::path payload;
};

Paths resolve(const fs::path& path) {
  fs::path stem = path;
  if (stem.extension() == ".json" || stem.extension() == ".raw") stem.replace_extension();
  fs::path header = stem;
  header += ".json";
  fs::path payload = stem;
  payload += ".raw";
  return {header, payload};
}

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

json make_header(const Dims& d, const Spacing& s, const char* dtype) {
  json h;
  h["dims"] = {d.nx, d.ny, d.nz};
  h["spacing"] = {s.sx, s.sy, s.sz};
  h["dtype"] = dtype;
  h["order"] = "x-fastest";
  h["endianness"] = "little";
  return h;
}

void write_header(const json& h, const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
  out << h.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + p.string());
}

template <typename Stored>
void write_payload(const std::vector<Stored>& values, const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
  for (Stored v : values) {
    const Stored le = to_little(v);
    out.write(reinterpret_cast<const char*>(&le), sizeof(Stored));
  }
  if (!out) throw std::runtime_error("failed writing " + p.string());
}

struct Header {
  Dims dims;
  Spacing spacing;
  std::string dtype;
  int channels = 1;
};

Header read_header(const fs::path& p, const char* expected_dtype, int expected_channels) {
  std::ifstream in(p);
  if (!in) throw FormatError("cannot open header " + p.string());
  json h;
  try {
    h = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("malformed header " + p.string() + ": " + e.what());
  }
  Header out;
  try {
    const auto dims = h.at("dims").get<std::vector<long long>>();
    if (dims.size() != 3) throw FormatError("dims must have 3 entries");
    for (long long v : dims)
      if (v < 1 || v > (1LL << 20)) throw FormatError("dims entries must be positive");
    out.dims = {static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2])};
    if (h.contains("spacing")) {
      const auto sp = h.at("spacing").get<std::vector<double>>();
      if (sp.size() != 3) throw FormatError("spacing must have 3 entries");
      out.spacing = {sp[0], sp[1], sp[2]};
    }
    out.dtype = h.at("dtype").get<std::string>();
    if (h.value("order", std::string("x-fastest")) != "x-fastest")
      throw FormatError("unsupported order, expected x-fastest");
    if (h.value("endianness", std::string("little")) != "little")
      throw FormatError("unsupported endianness, expected little");
    out.channels = h.value("channels", 1);
    if (out.channels == 3 && h.value("layout", std::string("planar")) != "planar")
      throw FormatError("unsupported layout, expected planar");
  } catch (const json::exception& e) {
    throw FormatError("malformed header " + p.string() + ": " + e.what());
  }
  if (out.dtype != expected_dtype) {
    throw FormatError("header " + p.string() + " has dtype " + out.dtype + ", expected " +
                      expected_dtype);
  }
  if (out.channels != expected_channels) {
    throw FormatError("header " + p.string() + " has " + std::to_string(out.channels) +
                      " channels, expected " + std::to_string(expected_channels));
  }
  return out;
}

template <typename Stored>
std::vector<Stored> read_payload(const fs::path& p, std::size_t expected) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot open payload " + p.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != expected * sizeof(Stored)) {
    throw FormatError("payload " + p.string() + " holds " +
                      std::to_string(bytes.size() / sizeof(Stored)) + " values, header expects " +
                      std::to_string(expected));
  }
  std::vector<Stored> out(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    Stored v;
    std::memcpy(&v, bytes.data() + i * sizeof(Stored), sizeof(Stored));
    out[i] = to_little(v);
  }
  return out;
}

std::vector<double> read_f32(const fs::path& p, std::size_t expected) {
  const std::vector<float> raw = read_payload<float>(p, expected);
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(raw[i]))
      throw FormatError("payload " + p.string() + " contains non-finite value at " +
                        std::to_string(i));
    out[i] = raw[i];
  }
  return out;
}

std::vector<float> to_f32(std::span<const double> data) {
  return std::vector<float>(data.begin(), data.end());
}

}  // namespace

void save_volume(const Volume& vol, const fs::path& path) {
  const Paths p = resolve(path);
  write_header(make_header(vol.dims(), vol.spacing(), "f32"), p.header);
  write_payload(to_f32(vol.data()), p.payload);
}

Volume load_volume(const fs::path& path) {
  const Paths p = resolve(path);
  const Header h = read_header(p.header, "f32", 1);
  return Volume(h.dims, read_f32(p.payload, h.dims.count()), h.spacing);
}

void save_labels(const LabelMap& lm, const fs::path& path) {
  const Paths p = resolve(path);
  write_header(make_header(lm.dims(), lm.spacing(), "u16"), p.header);
  write_payload(lm.vector(), p.payload);
}

LabelMap load_labels(const fs::path& path) {
  const Paths p = resolve(path);
  const Header h = read_header(p.header, "u16", 1);
  return LabelMap(h.dims, read_payload<std::uint16_t>(p.payload, h.dims.count()), h.spacing);
}

void save_field(const VectorField& f, const fs::path& path) {
  const Paths p = resolve(path);
  json h = make_header(f.dims(), {}, "f32");
  h["channels"] = 3;
  h["layout"] = "planar";
  write_header(h, p.header);
  write_payload(to_f32(f.data()), p.payload);
}

VectorField load_field(const fs::path& path) {
  const Paths p = resolve(path);
  const Header h = read_header(p.header, "f32", 3);
  return VectorField(h.dims, read_f32(p.payload, 3 * h.dims.count()));
}

std::string peek_dtype(const fs::path& path) {
  const Paths p = resolve(path);
  std::ifstream in(p.header);
  if (!in) throw FormatError("cannot open header " + p.header.string());
  try {
    return json::parse(in).at("dtype").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError("malformed header " + p.header.string() + ": " + e.what());
  }
}

}  // namespace symreg
