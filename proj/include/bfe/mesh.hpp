#pragma once

// Tetrahedral mesh of the solid with its matched boundary triangulation.

#include "bfe/core.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

namespace bfe {

using Tet = std::array<int, 4>;
using Tri = std::array<int, 3>;

inline double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).cross(c - a).dot(d - a) / 6.0;
}

/// Local faces of a tetrahedron, each ordered so that its normal points away
/// from the opposite vertex when the tetrahedron is positively oriented.
inline constexpr std::array<std::array<int, 3>, 4> kTetFaces{{{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}}};

class CoupledMesh {
public:
  CoupledMesh() = default;

  /// Builds a mesh from cells only; the boundary triangulation is derived.
  static CoupledMesh from_tets(std::vector<Vec3> vertices, std::vector<Tet> tets) {
    CoupledMesh m;
    m.vertices_ = std::move(vertices);
    m.tets_ = std::move(tets);
    m.check_tets();
    m.boundary_tris_ = m.derive_boundary();
    m.finish();
    return m;
  }

  /// Builds a mesh from cells and an explicit boundary triangulation and
  /// cross-checks both.
  static CoupledMesh from_parts(std::vector<Vec3> vertices, std::vector<Tet> tets, std::vector<Tri> tris) {
    CoupledMesh m;
    m.vertices_ = std::move(vertices);
    m.tets_ = std::move(tets);
    m.check_tets();
    for (std::size_t f = 0; f < tris.size(); ++f)
      for (int v : tris[f])
        if (v < 0 || v >= static_cast<int>(m.vertices_.size()))
          throw DimensionError("boundary triangle " + std::to_string(f) + " references missing vertex " +
                               std::to_string(v));
    m.boundary_tris_ = std::move(tris);
    m.cross_check_boundary();
    m.finish();
    return m;
  }

  const std::vector<Vec3>& vertices() const noexcept { return vertices_; }
  const std::vector<Tet>& tets() const noexcept { return tets_; }
  const std::vector<Tri>& boundary_tris() const noexcept { return boundary_tris_; }
  const std::vector<int>& tri_to_tet() const noexcept { return tri_to_tet_; }

  int num_vertices() const noexcept { return static_cast<int>(vertices_.size()); }
  int num_tets() const noexcept { return static_cast<int>(tets_.size()); }
  int num_boundary_tris() const noexcept { return static_cast<int>(boundary_tris_.size()); }

  /// Mesh vertex ids on the boundary, ascending; position = Dirichlet dof index.
  const std::vector<int>& boundary_vertices() const noexcept { return boundary_vertices_; }
  /// Mesh vertex id -> boundary dof index, or -1.
  const std::vector<int>& boundary_index() const noexcept { return boundary_index_; }
  int num_boundary_vertices() const noexcept { return static_cast<int>(boundary_vertices_.size()); }

  double tet_volume(int t) const {
    const auto& c = tets_[t];
    return signed_volume(vertices_[c[0]], vertices_[c[1]], vertices_[c[2]], vertices_[c[3]]);
  }
  double volume() const {
    double v = 0;
    for (int t = 0; t < num_tets(); ++t) v += tet_volume(t);
    return v;
  }
  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& v : vertices_) c += v;
    return c / static_cast<double>(vertices_.size());
  }
  double diameter() const {
    double d = 0;
    for (int a : boundary_vertices_)
      for (int b : boundary_vertices_) d = std::max(d, (vertices_[a] - vertices_[b]).norm());
    return d;
  }
  /// Radius of the smallest centroid-centred ball containing the boundary.
  double circumscribing_radius() const {
    const Vec3 c = centroid();
    double r = 0;
    for (int a : boundary_vertices_) r = std::max(r, (vertices_[a] - c).norm());
    return r;
  }

private:
  void check_tets() {
    const int nv = static_cast<int>(vertices_.size());
    for (std::size_t t = 0; t < tets_.size(); ++t) {
      for (int v : tets_[t])
        if (v < 0 || v >= nv)
          throw DimensionError("cell " + std::to_string(t) + " references missing vertex " + std::to_string(v));
      const double vol = tet_volume(static_cast<int>(t));
      if (!(vol > 0.0))
        throw OrientationError("cell " + std::to_string(t) + " has non-positive volume " + std::to_string(vol));
    }
  }

  static std::array<int, 3> sorted(std::array<int, 3> f) {
    std::sort(f.begin(), f.end());
    return f;
  }

  // face key -> (owning tet, oriented face)
  std::map<std::array<int, 3>, std::pair<int, Tri>> boundary_faces() const {
    std::map<std::array<int, 3>, std::pair<int, Tri>> once;
    std::set<std::array<int, 3>> twice;
    for (int t = 0; t < num_tets(); ++t) {
      for (const auto& lf : kTetFaces) {
        const Tri f{tets_[t][lf[0]], tets_[t][lf[1]], tets_[t][lf[2]]};
        const auto key = sorted(f);
        if (twice.count(key)) throw DimensionError("face shared by more than two cells");
        auto it = once.find(key);
        if (it != once.end()) {
          once.erase(it);
          twice.insert(key);
        } else {
          once.emplace(key, std::make_pair(t, f));
        }
      }
    }
    return once;
  }

  std::vector<Tri> derive_boundary() const {
    std::vector<Tri> out;
    for (const auto& [key, owner] : boundary_faces()) out.push_back(owner.second);
    return out;
  }

  void cross_check_boundary() const {
    auto faces = boundary_faces();
    if (faces.size() != boundary_tris_.size())
      throw WatertightError("boundary triangulation has " + std::to_string(boundary_tris_.size()) +
                            " faces but the cells expose " + std::to_string(faces.size()));
    for (std::size_t f = 0; f < boundary_tris_.size(); ++f) {
      const auto& tri = boundary_tris_[f];
      auto it = faces.find(sorted(tri));
      if (it == faces.end())
        throw WatertightError("boundary triangle " + std::to_string(f) + " is not a boundary face of any cell");
      const Tet& cell = tets_[it->second.first];
      int opposite = -1;
      for (int v : cell)
        if (v != tri[0] && v != tri[1] && v != tri[2]) opposite = v;
      const Vec3 n = (vertices_[tri[1]] - vertices_[tri[0]]).cross(vertices_[tri[2]] - vertices_[tri[0]]);
      if (!(n.dot(vertices_[tri[0]] - vertices_[opposite]) > 0.0))
        throw OrientationError("boundary triangle " + std::to_string(f) + " (" + std::to_string(tri[0]) + " " +
                               std::to_string(tri[1]) + " " + std::to_string(tri[2]) +
                               ") has an inward normal");
    }
  }

  void check_watertight() const {
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& t : boundary_tris_)
      for (int e = 0; e < 3; ++e) {
        int a = t[e], b = t[(e + 1) % 3];
        if (a > b) std::swap(a, b);
        ++edge_count[{a, b}];
      }
    for (const auto& [e, c] : edge_count)
      if (c != 2)
        throw WatertightError("boundary edge (" + std::to_string(e.first) + ", " + std::to_string(e.second) +
                              ") is shared by " + std::to_string(c) + " triangles");
  }

  void finish() {
    check_watertight();
    // owning tet of every boundary face
    auto faces = boundary_faces();
    tri_to_tet_.assign(boundary_tris_.size(), -1);
    for (std::size_t f = 0; f < boundary_tris_.size(); ++f) tri_to_tet_[f] = faces.at(sorted(boundary_tris_[f])).first;
    boundary_index_.assign(vertices_.size(), -1);
    std::set<int> bv;
    for (const auto& t : boundary_tris_) bv.insert(t.begin(), t.end());
    boundary_vertices_.assign(bv.begin(), bv.end());
    for (std::size_t i = 0; i < boundary_vertices_.size(); ++i) boundary_index_[boundary_vertices_[i]] = static_cast<int>(i);
  }

  std::vector<Vec3> vertices_;
  std::vector<Tet> tets_;
  std::vector<Tri> boundary_tris_;
  std::vector<int> tri_to_tet_;
  std::vector<int> boundary_vertices_;
  std::vector<int> boundary_index_;
};

/// Boundary surface in boundary-local numbering, with per-face geometry.
struct Surface {
  std::vector<Vec3> vertices;  // indexed by boundary dof
  std::vector<Tri> tris;       // boundary dof indices, outward orientation
  std::vector<Vec3> normals;   // unit outward normals
  std::vector<double> areas;
  std::vector<Vec3> centroids;
  std::vector<double> diameters;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_faces() const { return static_cast<int>(tris.size()); }

  static Surface from_triangles(std::vector<Vec3> verts, std::vector<Tri> tris) {
    Surface s;
    s.vertices = std::move(verts);
    s.tris = std::move(tris);
    for (const auto& t : s.tris) {
      const Vec3& a = s.vertices[t[0]];
      const Vec3& b = s.vertices[t[1]];
      const Vec3& c = s.vertices[t[2]];
      const Vec3 n = (b - a).cross(c - a);
      s.areas.push_back(0.5 * n.norm());
      s.normals.push_back(n.normalized());
      s.centroids.push_back((a + b + c) / 3.0);
      s.diameters.push_back(std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()}));
    }
    return s;
  }

  static Surface from_mesh(const CoupledMesh& m) {
    std::vector<Vec3> verts;
    for (int v : m.boundary_vertices()) verts.push_back(m.vertices()[v]);
    std::vector<Tri> tris;
    for (const auto& t : m.boundary_tris())
      tris.push_back({m.boundary_index()[t[0]], m.boundary_index()[t[1]], m.boundary_index()[t[2]]});
    return from_triangles(std::move(verts), std::move(tris));
  }

  double max_diameter() const { return *std::max_element(diameters.begin(), diameters.end()); }
  double total_area() const {
    double a = 0;
    for (double x : areas) a += x;
    return a;
  }
};

namespace meshgen {

/// Reference tetrahedron (0,0,0), (1,0,0), (0,1,0), (0,0,1).
inline CoupledMesh reference_tet() {
  return CoupledMesh::from_tets({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)}, {Tet{0, 1, 2, 3}});
}

/// Axis-aligned cube [0, side]^3 split into n^3 cells of six tetrahedra each
/// (Kuhn subdivision, conforming across cells).
inline CoupledMesh cube(int n = 1, double side = 1.0) {
  if (n < 1) throw DimensionError("cube subdivision must be >= 1");
  std::vector<Vec3> verts;
  auto id = [n](int i, int j, int k) { return (k * (n + 1) + j) * (n + 1) + i; };
  for (int k = 0; k <= n; ++k)
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) verts.emplace_back(side * i / n, side * j / n, side * k / n);
  std::vector<Tet> tets;
  const std::array<std::array<int, 3>, 6> perms{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        for (const auto& p : perms) {
          std::array<int, 3> cur{i, j, k};
          Tet t;
          t[0] = id(cur[0], cur[1], cur[2]);
          for (int s = 0; s < 3; ++s) {
            ++cur[p[s]];
            t[s + 1] = id(cur[0], cur[1], cur[2]);
          }
          if (signed_volume(verts[t[0]], verts[t[1]], verts[t[2]], verts[t[3]]) < 0) std::swap(t[2], t[3]);
          tets.push_back(t);
        }
  return CoupledMesh::from_tets(std::move(verts), std::move(tets));
}

/// Icosahedron refined `level` times, vertices projected onto the sphere of radius r.
inline Surface icosphere(int level, double radius = 1.0) {
  const double g = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v{{-1, g, 0}, {1, g, 0}, {-1, -g, 0}, {1, -g, 0}, {0, -1, g}, {0, 1, g},
                      {0, -1, -g}, {0, 1, -g}, {g, 0, -1}, {g, 0, 1}, {-g, 0, -1}, {-g, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Tri> f{{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                     {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
                     {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<Tri> nf;
    for (const auto& t : f) {
      const int ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
      nf.push_back({t[0], ab, ca});
      nf.push_back({t[1], bc, ab});
      nf.push_back({t[2], ca, bc});
      nf.push_back({ab, bc, ca});
    }
    f = std::move(nf);
  }
  for (auto& p : v) p *= radius;
  return Surface::from_triangles(std::move(v), std::move(f));
}

namespace detail {
// Splits the prism between `inner` and `outer` copies of triangle t into three
// tetrahedra. Diagonals follow the (larger bottom id, smaller top id) rule so
// neighbouring prisms agree on shared quadrilaterals.
inline void split_prism(Tri t, int inner_offset, int outer_offset, const std::vector<Vec3>& verts,
                        std::vector<Tet>& out) {
  std::sort(t.begin(), t.end());
  const int a = t[0] + inner_offset, b = t[1] + inner_offset, c = t[2] + inner_offset;
  const int A = t[0] + outer_offset, B = t[1] + outer_offset, C = t[2] + outer_offset;
  for (Tet tet : {Tet{a, b, c, A}, Tet{b, c, A, B}, Tet{c, A, B, C}}) {
    if (signed_volume(verts[tet[0]], verts[tet[1]], verts[tet[2]], verts[tet[3]]) < 0) std::swap(tet[2], tet[3]);
    out.push_back(tet);
  }
}
}  // namespace detail

/// Solid ball bounded by an icosphere: a fan of tetrahedra around the centre,
/// optionally with `shells` extra layers of prisms (radii evenly spaced).
inline CoupledMesh ball(int level, int shells = 0, double radius = 1.0) {
  const Surface s = icosphere(level, 1.0);
  const int ns = s.num_vertices();
  std::vector<Vec3> verts{Vec3::Zero()};
  const int layers = shells + 1;
  for (int l = 1; l <= layers; ++l)
    for (const auto& p : s.vertices) verts.push_back(p * radius * l / layers);
  std::vector<Tet> tets;
  for (const auto& t : s.tris) {
    Tet tet{0, t[0] + 1, t[1] + 1, t[2] + 1};
    if (signed_volume(verts[tet[0]], verts[tet[1]], verts[tet[2]], verts[tet[3]]) < 0) std::swap(tet[2], tet[3]);
    tets.push_back(tet);
  }
  for (int l = 1; l < layers; ++l)
    for (const auto& t : s.tris) detail::split_prism(t, 1 + (l - 1) * ns, 1 + l * ns, verts, tets);
  return CoupledMesh::from_tets(std::move(verts), std::move(tets));
}

/// Exterior layer between Gamma and its radial dilation by `outer_factor`
/// about the mesh centroid. Vertices [0, N_d) coincide with the boundary dofs
/// of `surf`; used for truncated-annulus diagnostics of exterior fields.
inline CoupledMesh annulus(const Surface& surf, const Vec3& centre, double outer_factor = 2.0, int layers = 3) {
  const int nd = surf.num_vertices();
  std::vector<Vec3> verts;
  for (int l = 0; l <= layers; ++l) {
    const double f = 1.0 + (outer_factor - 1.0) * l / layers;
    for (const auto& p : surf.vertices) verts.push_back(centre + f * (p - centre));
  }
  std::vector<Tet> tets;
  for (int l = 0; l < layers; ++l)
    for (const auto& t : surf.tris) detail::split_prism(t, l * nd, (l + 1) * nd, verts, tets);
  return CoupledMesh::from_tets(std::move(verts), std::move(tets));
}

/// Uniform red refinement: every tetrahedron splits into eight.
inline CoupledMesh refine(const CoupledMesh& m) {
  std::vector<Vec3> verts = m.vertices();
  std::map<std::pair<int, int>, int> mid;
  auto midpoint = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = mid.find(key);
    if (it != mid.end()) return it->second;
    verts.push_back(0.5 * (verts[a] + verts[b]));
    const int id = static_cast<int>(verts.size()) - 1;
    mid.emplace(key, id);
    return id;
  };
  std::vector<Tet> tets;
  for (const auto& t : m.tets()) {
    const int v0 = t[0], v1 = t[1], v2 = t[2], v3 = t[3];
    const int m01 = midpoint(v0, v1), m02 = midpoint(v0, v2), m03 = midpoint(v0, v3);
    const int m12 = midpoint(v1, v2), m13 = midpoint(v1, v3), m23 = midpoint(v2, v3);
    const std::array<Tet, 8> kids{{{v0, m01, m02, m03}, {m01, v1, m12, m13}, {m02, m12, v2, m23},
                                   {m03, m13, m23, v3}, {m01, m02, m03, m13}, {m01, m02, m12, m13},
                                   {m02, m03, m13, m23}, {m02, m12, m13, m23}}};
    for (Tet k : kids) {
      if (signed_volume(verts[k[0]], verts[k[1]], verts[k[2]], verts[k[3]]) < 0) std::swap(k[2], k[3]);
      tets.push_back(k);
    }
  }
  return CoupledMesh::from_tets(std::move(verts), std::move(tets));
}

}  // namespace meshgen
}  // namespace bfe
