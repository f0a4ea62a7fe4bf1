// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "splatgen/errors.hpp"
#include "splatgen/gaussian_set.hpp"

namespace splatgen {

namespace ply {

enum class Type { kFloat, kDouble, kChar, kUChar, kShort, kUShort, kInt, kUInt };

inline std::size_t type_size(Type t) {
  switch (t) {
    case Type::kChar:
    case Type::kUChar: return 1;
    case Type::kShort:
    case Type::kUShort: return 2;
    case Type::kInt:
    case Type::kUInt:
    case Type::kFloat: return 4;
    case Type::kDouble: return 8;
  }
  return 0;
}

inline Type parse_type(const std::string& s) {
  if (s == "float" || s == "float32") return Type::kFloat;
  if (s == "double" || s == "float64") return Type::kDouble;
  if (s == "char" || s == "int8") return Type::kChar;
  if (s == "uchar" || s == "uint8") return Type::kUChar;
  if (s == "short" || s == "int16") return Type::kShort;
  if (s == "ushort" || s == "uint16") return Type::kUShort;
  if (s == "int" || s == "int32") return Type::kInt;
  if (s == "uint" || s == "uint32") return Type::kUInt;
  throw FormatError("ply: unsupported property type '" + s + "'");
}

struct Property {
  std::string name;
  Type type = Type::kFloat;
  bool is_list = false;
  Type count_type = Type::kUChar;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;

  int find(const std::string& prop) const {
    for (std::size_t i = 0; i < properties.size(); ++i)
      if (properties[i].name == prop) return static_cast<int>(i);
    return -1;
  }
};

struct Header {
  bool binary = true;
  std::vector<Element> elements;
};

inline Header read_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("ply: empty file");
  if (line.size() >= 1 && line.back() == '\r') line.pop_back();
  if (line != "ply") throw FormatError("ply: missing magic");
  Header h;
  bool have_format = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "comment" || tok == "obj_info" || tok.empty()) continue;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian") h.binary = true;
      else if (fmt == "ascii") h.binary = false;
      else throw FormatError("ply: unsupported format '" + fmt + "'");
      have_format = true;
    } else if (tok == "element") {
      Element e;
      ls >> e.name >> e.count;
      h.elements.push_back(e);
    } else if (tok == "property") {
      if (h.elements.empty()) throw FormatError("ply: property before element");
      std::string t;
      ls >> t;
      Property p;
      if (t == "list") {
        std::string ct, vt;
        ls >> ct >> vt >> p.name;
        p.is_list = true;
        p.count_type = parse_type(ct);
        p.type = parse_type(vt);
      } else {
        p.type = parse_type(t);
        ls >> p.name;
      }
      h.elements.back().properties.push_back(p);
    } else if (tok == "end_header") {
      if (!have_format) throw FormatError("ply: missing format line");
      return h;
    } else {
      throw FormatError("ply: unexpected header token '" + tok + "'");
    }
  }
  throw FormatError("ply: missing end_header");
}

inline double decode_scalar(const unsigned char* p, Type t) {
  switch (t) {
    case Type::kFloat: {
      float v;
      std::memcpy(&v, p, 4);
      return v;
    }
    case Type::kDouble: {
      double v;
      std::memcpy(&v, p, 8);
      return v;
    }
    case Type::kChar: return *reinterpret_cast<const signed char*>(p);
    case Type::kUChar: return *p;
    case Type::kShort: {
      std::int16_t v;
      std::memcpy(&v, p, 2);
      return v;
    }
    case Type::kUShort: {
      std::uint16_t v;
      std::memcpy(&v, p, 2);
      return v;
    }
    case Type::kInt: {
      std::int32_t v;
      std::memcpy(&v, p, 4);
      return v;
    }
    case Type::kUInt: {
      std::uint32_t v;
      std::memcpy(&v, p, 4);
      return v;
    }
  }
  return 0.0;
}

/// Reads one element's scalar rows into a row-major double table.
/// List properties are rejected for the requested element.
inline std::vector<double> read_element_rows(std::istream& in, const Header& h,
                                             const Element& target) {
  for (const Element& e : h.elements) {
    const bool is_target = &e == &target;
    bool has_list = false;
    for (const Property& p : e.properties) has_list |= p.is_list;
    if (is_target && has_list) throw FormatError("ply: list property in '" + e.name + "'");
    if (is_target) {
      std::vector<double> rows(e.count * e.properties.size());
      if (h.binary) {
        std::size_t stride = 0;
        for (const Property& p : e.properties) stride += type_size(p.type);
        std::vector<unsigned char> buf(stride);
        for (std::size_t r = 0; r < e.count; ++r) {
          in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(stride));
          if (!in) throw FormatError("ply: truncated data in '" + e.name + "'");
          std::size_t off = 0;
          for (std::size_t c = 0; c < e.properties.size(); ++c) {
            rows[r * e.properties.size() + c] = decode_scalar(buf.data() + off, e.properties[c].type);
            off += type_size(e.properties[c].type);
          }
        }
      } else {
        for (std::size_t r = 0; r < e.count; ++r)
          for (std::size_t c = 0; c < e.properties.size(); ++c)
            if (!(in >> rows[r * e.properties.size() + c]))
              throw FormatError("ply: truncated data in '" + e.name + "'");
      }
      return rows;
    }
    // Skip a preceding element.
    if (h.binary) {
      for (std::size_t r = 0; r < e.count; ++r) {
        for (const Property& p : e.properties) {
          if (p.is_list) {
            std::vector<unsigned char> cb(type_size(p.count_type));
            in.read(reinterpret_cast<char*>(cb.data()), static_cast<std::streamsize>(cb.size()));
            const auto n = static_cast<std::size_t>(decode_scalar(cb.data(), p.count_type));
            in.seekg(static_cast<std::streamoff>(n * type_size(p.type)), std::ios::cur);
          } else {
            in.seekg(static_cast<std::streamoff>(type_size(p.type)), std::ios::cur);
          }
        }
      }
    } else {
      for (std::size_t r = 0; r < e.count; ++r) {
        for (const Property& p : e.properties) {
          if (p.is_list) {
            std::size_t n;
            in >> n;
            double tmp;
            for (std::size_t k = 0; k < n; ++k) in >> tmp;
          } else {
            double tmp;
            in >> tmp;
          }
        }
      }
    }
  }
  throw FormatError("ply: element not found");
}

}  // namespace ply

namespace detail {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// Opacity raws are clamped to +-16 before writing so that logit/logistic
// round-trips reproduce the file bytes exactly.
inline constexpr double kOpacityRawClamp = 16.0;

}  // namespace detail

/// Reads a splat PLY (binary little-endian or ascii) into a GaussianSet,
/// applying activations: exp on scales, logistic on opacity. Quaternions are
/// normalized when the stored values are not already unit-norm.
inline GaussianSet load_splat(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_splat: cannot open '" + path + "'");
  const ply::Header h = ply::read_header(in);
  const ply::Element* vertex = nullptr;
  for (const ply::Element& e : h.elements)
    if (e.name == "vertex") vertex = &e;
  if (!vertex) throw FormatError("load_splat: missing 'vertex' element");

  const char* required[] = {"x",       "y",       "z",       "f_dc_0", "f_dc_1",
                            "f_dc_2",  "opacity", "scale_0", "scale_1", "scale_2",
                            "rot_0",   "rot_1",   "rot_2",   "rot_3"};
  int idx[14];
  for (int k = 0; k < 14; ++k) {
    idx[k] = vertex->find(required[k]);
    if (idx[k] < 0)
      throw FormatError(std::string("load_splat: missing property '") + required[k] + "'");
  }

  // f_rest count fixes the SH degree: 3 * ((L+1)^2 - 1).
  std::vector<int> rest;
  for (int i = 0;; ++i) {
    const int j = vertex->find("f_rest_" + std::to_string(i));
    if (j < 0) break;
    rest.push_back(j);
  }
  int degree = -1;
  for (int L = 0; L <= kMaxShDegree; ++L)
    if (static_cast<int>(rest.size()) == 3 * (sh_coeff_count(L) - 1)) degree = L;
  if (degree < 0)
    throw FormatError("load_splat: f_rest property count " + std::to_string(rest.size()) +
                      " does not match any SH degree in [0, 3]");

  const std::vector<double> rows = ply::read_element_rows(in, h, *vertex);
  const std::size_t ncols = vertex->properties.size();
  const int n = sh_coeff_count(degree);

  GaussianSet set(degree);
  set.reserve(vertex->count);
  for (std::size_t r = 0; r < vertex->count; ++r) {
    const double* row = rows.data() + r * ncols;
    auto at = [&](int col) { return row[col]; };
    Gaussian g;
    g.position = Vec3(at(idx[0]), at(idx[1]), at(idx[2]));
    const double raw_opacity = at(idx[6]);
    const Vec3 raw_scale(at(idx[7]), at(idx[8]), at(idx[9]));
    Quat q(at(idx[10]), at(idx[11]), at(idx[12]), at(idx[13]));  // w, x, y, z
    for (int k = 0; k < 14; ++k)
      if (!std::isfinite(at(idx[k])))
        throw DataError("load_splat: non-finite value in record " + std::to_string(r));
    g.opacity = detail::logistic(raw_opacity);
    g.scale = raw_scale.array().exp();
    const double qn = q.norm();
    if (qn <= 0.0) throw DataError("load_splat: zero quaternion in record " + std::to_string(r));
    if (std::abs(qn - 1.0) > 1e-6) q.coeffs() /= qn;
    g.rotation = q;
    g.sh.resize(3 * static_cast<std::size_t>(n));
    for (int ch = 0; ch < 3; ++ch) {
      g.sh[ch * n] = at(idx[3 + ch]);
      for (int k = 1; k < n; ++k) {
        const double v = row[rest[ch * (n - 1) + (k - 1)]];
        if (!std::isfinite(v))
          throw DataError("load_splat: non-finite value in record " + std::to_string(r));
        g.sh[ch * n + k] = v;
      }
    }
    set.add(g);
  }
  return set;
}

/// Writes a GaussianSet as a binary little-endian splat PLY, inverting the
/// load-time activations (log on scales, logit on opacity).
inline void save_splat(const GaussianSet& set, const std::string& path) {
  const int n = set.coeffs_per_channel();
  const int nrest = 3 * (n - 1);

  // Validate before touching the filesystem.
  std::vector<float> data;
  data.reserve(set.count() * static_cast<std::size_t>(14 + nrest));
  for (std::size_t i = 0; i < set.count(); ++i) {
    const Vec3& p = set.positions()[i];
    if (!p.allFinite())
      throw DataError("save_splat: non-finite position in record " + std::to_string(i));
    const Vec3& s = set.scales()[i];
    if (!(s.x() > 0 && s.y() > 0 && s.z() > 0) || !s.allFinite())
      throw DataError("save_splat: non-positive or non-finite scale in record " +
                      std::to_string(i));
    const double* sh = set.sh_ptr(i);
    double raw_op = detail::logit(
        std::clamp(set.opacities()[i], detail::logistic(-detail::kOpacityRawClamp),
                   detail::logistic(detail::kOpacityRawClamp)));
    const Quat& q = set.rotations()[i];
    float row[14 + 3 * (sh_coeff_count(kMaxShDegree) - 1)];
    int c = 0;
    row[c++] = static_cast<float>(p.x());
    row[c++] = static_cast<float>(p.y());
    row[c++] = static_cast<float>(p.z());
    for (int ch = 0; ch < 3; ++ch) row[c++] = static_cast<float>(sh[ch * n]);
    for (int ch = 0; ch < 3; ++ch)
      for (int k = 1; k < n; ++k) row[c++] = static_cast<float>(sh[ch * n + k]);
    row[c++] = static_cast<float>(raw_op);
    for (int a = 0; a < 3; ++a) row[c++] = static_cast<float>(std::log(s[a]));
    row[c++] = static_cast<float>(q.w());
    row[c++] = static_cast<float>(q.x());
    row[c++] = static_cast<float>(q.y());
    row[c++] = static_cast<float>(q.z());
    for (int k = 0; k < c; ++k)
      if (!std::isfinite(row[k]))
        throw DataError("save_splat: non-finite attribute in record " + std::to_string(i));
    data.insert(data.end(), row, row + c);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_splat: cannot open '" + path + "' for writing");
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << set.count() << "\n";
  for (const char* a : {"x", "y", "z"}) out << "property float " << a << "\n";
  for (int k = 0; k < 3; ++k) out << "property float f_dc_" << k << "\n";
  for (int k = 0; k < nrest; ++k) out << "property float f_rest_" << k << "\n";
  out << "property float opacity\n";
  for (int k = 0; k < 3; ++k) out << "property float scale_" << k << "\n";
  for (int k = 0; k < 4; ++k) out << "property float rot_" << k << "\n";
  out << "end_header\n";
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) throw IoError("save_splat: write failed for '" + path + "'");
}

/// Reads x/y/z from any PLY vertex element (extra properties ignored).
inline std::vector<Vec3> load_point_cloud(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_point_cloud: cannot open '" + path + "'");
  const ply::Header h = ply::read_header(in);
  const ply::Element* vertex = nullptr;
  for (const ply::Element& e : h.elements)
    if (e.name == "vertex") vertex = &e;
  if (!vertex) throw FormatError("load_point_cloud: missing 'vertex' element");
  const int ix = vertex->find("x"), iy = vertex->find("y"), iz = vertex->find("z");
  if (ix < 0 || iy < 0 || iz < 0)
    throw FormatError("load_point_cloud: missing x/y/z in '" + path + "'");
  const std::vector<double> rows = ply::read_element_rows(in, h, *vertex);
  const std::size_t ncols = vertex->properties.size();
  std::vector<Vec3> pts(vertex->count);
  for (std::size_t r = 0; r < vertex->count; ++r) {
    const double* row = rows.data() + r * ncols;
    pts[r] = Vec3(row[ix], row[iy], row[iz]);
    if (!pts[r].allFinite())
      throw DataError("load_point_cloud: non-finite point in record " + std::to_string(r));
  }
  return pts;
}

inline void save_point_cloud(const std::vector<Vec3>& pts, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_point_cloud: cannot open '" + path + "' for writing");
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << pts.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  for (const Vec3& p : pts) {
    const float row[3] = {static_cast<float>(p.x()), static_cast<float>(p.y()),
                          static_cast<float>(p.z())};
    out.write(reinterpret_cast<const char*>(row), sizeof(row));
  }
  if (!out) throw IoError("save_point_cloud: write failed for '" + path + "'");
}

}  // namespace splatgen
