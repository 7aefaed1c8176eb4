#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "gsedit/errors.hpp"
#include "gsedit/scene.hpp"

namespace gsedit {

namespace {

enum class Field {
  X, Y, Z, Scale0, Scale1, Scale2, Rot0, Rot1, Rot2, Rot3, Opacity, Dc0, Dc1, Dc2, Label, Generation
};
constexpr int kFieldCount = 16;

struct PropSpec {
  const char* name;
  Field field;
  const char* type;  // canonical type name
  std::size_t bytes;
};

constexpr std::array<PropSpec, kFieldCount> kSchema{{
    {"x", Field::X, "float", 4},           {"y", Field::Y, "float", 4},
    {"z", Field::Z, "float", 4},           {"scale_0", Field::Scale0, "float", 4},
    {"scale_1", Field::Scale1, "float", 4}, {"scale_2", Field::Scale2, "float", 4},
    {"rot_0", Field::Rot0, "float", 4},    {"rot_1", Field::Rot1, "float", 4},
    {"rot_2", Field::Rot2, "float", 4},    {"rot_3", Field::Rot3, "float", 4},
    {"opacity", Field::Opacity, "float", 4}, {"f_dc_0", Field::Dc0, "float", 4},
    {"f_dc_1", Field::Dc1, "float", 4},    {"f_dc_2", Field::Dc2, "float", 4},
    {"label", Field::Label, "uchar", 1},   {"generation", Field::Generation, "int", 4},
}};

std::string canonical_type(const std::string& t) {
  if (t == "float32") return "float";
  if (t == "uint8") return "uchar";
  if (t == "int32") return "int";
  return t;
}

float* float_slot(GaussianParams& p, Field f) {
  switch (f) {
    case Field::X: return &p.position[0];
    case Field::Y: return &p.position[1];
    case Field::Z: return &p.position[2];
    case Field::Scale0: return &p.log_scale[0];
    case Field::Scale1: return &p.log_scale[1];
    case Field::Scale2: return &p.log_scale[2];
    case Field::Rot0: return &p.rotation[0];
    case Field::Rot1: return &p.rotation[1];
    case Field::Rot2: return &p.rotation[2];
    case Field::Rot3: return &p.rotation[3];
    case Field::Opacity: return &p.opacity_logit;
    case Field::Dc0: return &p.color[0];
    case Field::Dc1: return &p.color[1];
    case Field::Dc2: return &p.color[2];
    default: return nullptr;
  }
}

template <typename T>
T read_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

static_assert(std::endian::native == std::endian::little, "PLY I/O assumes a little-endian host");

}  // namespace

GaussianScene load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open scene file: " + path);
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  auto next_line = [&](std::string& line) -> std::size_t {
    const std::size_t start = pos;
    const std::size_t nl = buf.find('\n', pos);
    if (nl == std::string::npos) throw ParseError("unterminated PLY header", start);
    line = buf.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = nl + 1;
    return start;
  };

  std::string line;
  next_line(line);
  if (line != "ply") throw ParseError("missing 'ply' magic", 0);

  std::vector<const PropSpec*> layout;
  std::array<bool, kFieldCount> seen{};
  std::size_t vertex_count = 0;
  bool have_format = false, have_vertex = false, in_vertex = false;
  for (;;) {
    const std::size_t at = next_line(line);
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "end_header") break;
    if (kw == "comment" || kw == "obj_info" || kw.empty()) continue;
    if (kw == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt != "binary_little_endian") throw ParseError("unsupported PLY format '" + fmt + "'", at);
      have_format = true;
    } else if (kw == "element") {
      std::string name;
      long long count = -1;
      ls >> name >> count;
      if (name != "vertex" || have_vertex) throw ParseError("unexpected PLY element '" + name + "'", at);
      if (!ls || count < 0) throw ParseError("bad vertex count", at);
      vertex_count = static_cast<std::size_t>(count);
      have_vertex = in_vertex = true;
    } else if (kw == "property") {
      if (!in_vertex) throw ParseError("property outside vertex element", at);
      std::string type, name;
      ls >> type >> name;
      if (type == "list") throw ParseError("list properties are not supported", at);
      const PropSpec* spec = nullptr;
      for (const auto& s : kSchema)
        if (name == s.name) spec = &s;
      if (!spec) throw ParseError("unknown vertex property '" + name + "'", at);
      if (canonical_type(type) != spec->type)
        throw ParseError("property '" + name + "' must be " + spec->type + ", got " + type, at);
      const auto idx = static_cast<std::size_t>(spec->field);
      if (seen[idx]) throw ParseError("duplicate property '" + name + "'", at);
      seen[idx] = true;
      layout.push_back(spec);
    } else {
      throw ParseError("unrecognized header line '" + line + "'", at);
    }
  }
  if (!have_format) throw ParseError("missing format line", 0);
  if (!have_vertex) throw ParseError("missing vertex element", 0);
  for (int i = 0; i < kFieldCount; ++i)
    if (!seen[i]) throw ParseError(std::string("missing vertex property '") + kSchema[i].name + "'", pos);

  std::size_t stride = 0;
  for (const auto* s : layout) stride += s->bytes;
  const std::size_t payload = buf.size() - pos;
  if (payload < vertex_count * stride)
    throw ParseError("truncated vertex payload: need " + std::to_string(vertex_count * stride) +
                         " bytes, have " + std::to_string(payload),
                     buf.size());
  if (payload > vertex_count * stride) throw ParseError("trailing bytes after vertex payload", pos + vertex_count * stride);

  GaussianScene scene;
  scene.gaussians.resize(vertex_count);
  std::int32_t max_gen = 0;
  for (std::size_t v = 0; v < vertex_count; ++v) {
    Gaussian& g = scene.gaussians[v];
    std::size_t off = pos + v * stride;
    for (const auto* s : layout) {
      const char* p = buf.data() + off;
      if (s->field == Field::Label) {
        const auto b = static_cast<unsigned char>(*p);
        if (b > 1) throw ParseError("label must be 0 or 1 in vertex " + std::to_string(v), off, v);
        g.aux.label = b == 1;
      } else if (s->field == Field::Generation) {
        g.aux.generation = read_le<std::int32_t>(p);
        if (g.aux.generation < 0)
          throw ParseError("negative generation in vertex " + std::to_string(v), off, v);
        max_gen = std::max(max_gen, g.aux.generation);
      } else {
        const float f = read_le<float>(p);
        if (!std::isfinite(f))
          throw ParseError("non-finite " + std::string(s->name) + " in vertex " + std::to_string(v), off, v);
        *float_slot(g.params, s->field) = f;
      }
      off += s->bytes;
    }
  }
  scene.current_generation = max_gen;
  return scene;
}

void save_scene(const GaussianScene& scene, const std::string& path) {
  std::ostringstream header;
  header << "ply\n"
         << "format binary_little_endian 1.0\n"
         << "comment gsplat-edit v1\n"
         << "element vertex " << scene.size() << '\n';
  for (const auto& s : kSchema) header << "property " << s.type << ' ' << s.name << '\n';
  header << "end_header\n";

  std::string out = header.str();
  std::size_t stride = 0;
  for (const auto& s : kSchema) stride += s.bytes;
  const std::size_t start = out.size();
  out.resize(start + stride * scene.size());
  char* p = out.data() + start;
  for (const auto& g : scene.gaussians) {
    GaussianParams params = g.params;
    for (const auto& s : kSchema) {
      if (s.field == Field::Label) {
        *p = g.aux.label ? 1 : 0;
      } else if (s.field == Field::Generation) {
        std::memcpy(p, &g.aux.generation, 4);
      } else {
        std::memcpy(p, float_slot(params, s.field), 4);
      }
      p += s.bytes;
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write scene file: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("short write to " + path);
}

}  // namespace gsedit
