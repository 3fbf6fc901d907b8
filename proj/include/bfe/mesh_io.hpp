#pragma once

// ASCII mesh format:
//
//   # comment lines and blank lines are ignored
//   vertices <N>
//   <x> <y> <z>            (N lines)
//   tets <M>
//   <a> <b> <c> <d>        (M lines, 0-based vertex ids, positive volume)
//   tris <K>
//   <a> <b> <c>            (K lines, outward orientation)

#include "bfe/mesh.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace bfe {

namespace detail {

class LineReader {
public:
  explicit LineReader(std::istream& in) : in_(in) {}

  // Next non-empty, non-comment line; false at EOF.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++lineno_;
      const auto p = line.find_first_not_of(" \t\r");
      if (p == std::string::npos || line[p] == '#') continue;
      return true;
    }
    return false;
  }
  int lineno() const { return lineno_; }

private:
  std::istream& in_;
  int lineno_ = 0;
};

template <typename T, std::size_t N>
std::array<T, N> parse_record(const std::string& line, int lineno) {
  std::array<T, N> out{};
  std::size_t pos = 0;
  for (std::size_t k = 0; k < N; ++k) {
    const auto start = line.find_first_not_of(" \t\r", pos);
    if (start == std::string::npos)
      throw ParseError("expected " + std::to_string(N) + " values, found " + std::to_string(k), lineno,
                       static_cast<int>(line.size()) + 1);
    auto end = line.find_first_of(" \t\r", start);
    if (end == std::string::npos) end = line.size();
    const std::string tok = line.substr(start, end - start);
    std::istringstream ts(tok);
    T v{};
    ts >> v;
    if (ts.fail() || !ts.eof()) throw ParseError("malformed number '" + tok + "'", lineno, static_cast<int>(start) + 1);
    out[k] = v;
    pos = end;
  }
  const auto rest = line.find_first_not_of(" \t\r", pos);
  if (rest != std::string::npos) throw ParseError("unexpected trailing data", lineno, static_cast<int>(rest) + 1);
  return out;
}

inline int parse_header(LineReader& r, const std::string& name) {
  std::string line;
  if (!r.next(line)) throw ParseError("missing section '" + name + "'", r.lineno() + 1, 1);
  std::istringstream is(line);
  std::string key;
  long count = -1;
  is >> key >> count;
  if (key != name) throw ParseError("expected section '" + name + "', found '" + key + "'", r.lineno(), 1);
  std::string extra;
  if (is.fail() || count < 0 || (is >> extra))
    throw ParseError("section '" + name + "' needs a single non-negative count", r.lineno(),
                     static_cast<int>(name.size()) + 2);
  return static_cast<int>(count);
}

}  // namespace detail

inline CoupledMesh read_mesh(std::istream& in) {
  detail::LineReader r(in);
  std::string line;
  const int nv = detail::parse_header(r, "vertices");
  std::vector<Vec3> verts;
  for (int i = 0; i < nv; ++i) {
    if (!r.next(line)) throw ParseError("unexpected end of file in 'vertices'", r.lineno() + 1, 1);
    auto p = detail::parse_record<double, 3>(line, r.lineno());
    verts.emplace_back(p[0], p[1], p[2]);
  }
  const int nt = detail::parse_header(r, "tets");
  std::vector<Tet> tets;
  for (int i = 0; i < nt; ++i) {
    if (!r.next(line)) throw ParseError("unexpected end of file in 'tets'", r.lineno() + 1, 1);
    tets.push_back(detail::parse_record<int, 4>(line, r.lineno()));
  }
  const int nf = detail::parse_header(r, "tris");
  std::vector<Tri> tris;
  for (int i = 0; i < nf; ++i) {
    if (!r.next(line)) throw ParseError("unexpected end of file in 'tris'", r.lineno() + 1, 1);
    tris.push_back(detail::parse_record<int, 3>(line, r.lineno()));
  }
  if (r.next(line)) throw ParseError("unexpected content after 'tris' section", r.lineno(), 1);
  return CoupledMesh::from_parts(std::move(verts), std::move(tets), std::move(tris));
}

inline CoupledMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file '" + path + "'");
  try {
    return read_mesh(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.message(), e.line(), e.column());
  }
}

inline void write_mesh(std::ostream& out, const CoupledMesh& m) {
  out << "# bfe tetrahedral mesh\n";
  out << "vertices " << m.num_vertices() << "\n" << std::setprecision(17);
  for (const auto& v : m.vertices()) out << v.x() << ' ' << v.y() << ' ' << v.z() << "\n";
  out << "tets " << m.num_tets() << "\n";
  for (const auto& t : m.tets()) out << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << "\n";
  out << "tris " << m.num_boundary_tris() << "\n";
  for (const auto& t : m.boundary_tris()) out << t[0] << ' ' << t[1] << ' ' << t[2] << "\n";
}

inline void save_mesh(const std::string& path, const CoupledMesh& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write mesh file '" + path + "'");
  write_mesh(out, m);
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace bfe
