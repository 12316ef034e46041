#include "weakform/field_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>

#include "weakform/canonical_json.hpp"

namespace weakform {

namespace {

using nlohmann::json;

constexpr int kFieldVersion = 1;

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
  return v;
}

json grid_header(const Grid& g) {
  json shape = json::array(), lo = json::array(), hi = json::array(), periodic = json::array();
  for (const Axis& a : g.axes()) {
    shape.push_back(a.points);
    lo.push_back(a.lo);
    hi.push_back(a.hi);
    periodic.push_back(a.periodic);
  }
  return json{{"shape", shape}, {"lo", lo}, {"hi", hi}, {"periodic", periodic}};
}

}  // namespace

ScalarField StoredField::scalar() && {
  if (kind != "scalar" || components.size() != 1) throw IoError("stored field is not a scalar field");
  return std::move(components[0]);
}

VectorField StoredField::vector() && {
  if (kind != "vector") throw IoError("stored field is not a vector field");
  return VectorField(std::move(components));
}

std::string encode_field(const std::string& kind, std::span<const ScalarField* const> comps) {
  if (comps.empty()) throw InvalidArgument("no components to encode");
  const Grid& g = comps[0]->grid();
  json header = grid_header(g);
  header["kind"] = kind;
  header["components"] = comps.size();
  header["dtype"] = "f64le";
  header["order"] = "row-major";
  header["version"] = kFieldVersion;
  std::string out = canonical_dump(header);
  out.push_back('\n');
  const std::size_t head = out.size();
  out.resize(head + comps.size() * g.size() * 8);
  char* p = out.data() + head;
  for (const ScalarField* c : comps) {
    require_same_grid(c->grid(), g, "encode_field");
    for (double v : c->values()) {
      const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(v));
      std::memcpy(p, &bits, 8);
      p += 8;
    }
  }
  return out;
}

StoredField decode_field(const std::string& bytes) {
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string::npos) throw IoError("field file has no header line");
  json header;
  try {
    header = json::parse(bytes.substr(0, nl));
  } catch (const json::exception& e) {
    throw IoError(std::string("field header is not JSON: ") + e.what());
  }
  static const char* required[] = {"components", "dtype", "hi", "kind", "lo", "order", "periodic", "shape"};
  if (!header.is_object()) throw IoError("field header must be an object");
  for (const char* key : required)
    if (!header.contains(key)) throw IoError(std::string("field header lacks '") + key + "'");
  for (const auto& [key, _] : header.items()) {
    bool known = key == "version";
    for (const char* r : required) known = known || key == r;
    if (!known) throw IoError("field header has unknown key '" + key + "'");
  }
  if (header.contains("version") && header["version"] != kFieldVersion)
    throw IoError("unknown field format version " + header["version"].dump());
  if (header["dtype"] != "f64le") throw IoError("unsupported dtype " + header["dtype"].dump());
  if (header["order"] != "row-major") throw IoError("unsupported order " + header["order"].dump());
  const std::string kind = header["kind"].get<std::string>();
  if (kind != "scalar" && kind != "vector") throw IoError("unknown field kind '" + kind + "'");

  std::vector<Axis> axes;
  try {
    const auto& shape = header["shape"];
    if (!shape.is_array() || header["lo"].size() != shape.size() || header["hi"].size() != shape.size() ||
        header["periodic"].size() != shape.size())
      throw IoError("field header arrays disagree in length");
    for (std::size_t a = 0; a < shape.size(); ++a)
      axes.push_back(Axis{header["lo"].at(a).get<double>(), header["hi"].at(a).get<double>(),
                          shape[a].get<std::size_t>(), header["periodic"].at(a).get<bool>()});
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed grid in field header: ") + e.what());
  }
  Grid grid = [&] {
    try {
      return Grid(axes);
    } catch (const Error& e) {
      throw IoError(std::string("invalid grid in field header: ") + e.what());
    }
  }();
  const std::size_t k = header["components"].get<std::size_t>();
  if (k == 0 || (kind == "scalar" && k != 1) || (kind == "vector" && k != grid.dim()))
    throw IoError("component count " + std::to_string(k) + " does not fit a " + kind + " field");
  const std::size_t expected = k * grid.size() * 8;
  const std::size_t actual = bytes.size() - nl - 1;
  if (actual != expected)
    throw IoError("field payload length mismatch: expected " + std::to_string(expected) + " bytes, found " +
                  std::to_string(actual));

  StoredField out{kind, {}};
  const char* p = bytes.data() + nl + 1;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> values(grid.size());
    for (double& v : values) {
      std::uint64_t bits;
      std::memcpy(&bits, p, 8);
      v = std::bit_cast<double>(to_le(bits));
      p += 8;
    }
    out.components.emplace_back(grid, std::move(values));
  }
  return out;
}

void write_field(const std::filesystem::path& path, const ScalarField& f) {
  const ScalarField* comps[] = {&f};
  const std::string bytes = encode_field("scalar", comps);
  std::ofstream os(path, std::ios::binary);
  if (!os || !os.write(bytes.data(), static_cast<std::streamsize>(bytes.size())))
    throw IoError("cannot write " + path.string());
}

void write_field(const std::filesystem::path& path, const VectorField& v) {
  std::vector<const ScalarField*> comps;
  for (std::size_t c = 0; c < v.components(); ++c) comps.push_back(&v[c]);
  const std::string bytes = encode_field("vector", comps);
  std::ofstream os(path, std::ios::binary);
  if (!os || !os.write(bytes.data(), static_cast<std::streamsize>(bytes.size())))
    throw IoError("cannot write " + path.string());
}

StoredField read_field(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_field(bytes);
}

}  // namespace weakform
