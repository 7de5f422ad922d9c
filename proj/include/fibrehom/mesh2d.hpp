#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "fibrehom/core.hpp"

namespace fibrehom {

enum class Region { All, Matrix, Fibre };

/// Interface-fitted triangulation of the periodic cross-section [-1/2,1/2)^2
/// with the disk of radius r resolved by a polygon whose nodes sit exactly on
/// radius r.  Vertices on the x=+1/2 / y=+1/2 edges are ghost copies of their
/// periodic partners; `dof_of_node` maps every vertex to its periodic DOF.
///
/// Construction: concentric rings of 8j nodes inside the disk, an O-grid blend
/// from the interface polygon to the cell boundary outside, everything closed
/// under the dihedral symmetries x->-x, y->-y, (x,y)->(y,x).
struct PeriodicMesh2D {
  struct Tri {
    std::array<Index, 3> v;
    Region tag;
  };

  std::vector<Vec2> vertices;
  std::vector<Tri> triangles;
  std::vector<Index> interface_nodes;          // vertex ids on the disk polygon
  std::vector<std::pair<Index, Index>> periodic_pairs;  // (ghost, canonical)
  std::vector<Index> dof_of_node;
  Index n_dofs = 0;
  Real r = 0.0;
  Real h = 0.0;

  Index n_vertices() const { return static_cast<Index>(vertices.size()); }
  Index n_triangles() const { return static_cast<Index>(triangles.size()); }

  Real triangle_area(Index t) const {
    const auto& tr = triangles[static_cast<std::size_t>(t)];
    const Vec2& a = vertices[static_cast<std::size_t>(tr.v[0])];
    const Vec2& b = vertices[static_cast<std::size_t>(tr.v[1])];
    const Vec2& c = vertices[static_cast<std::size_t>(tr.v[2])];
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
  }

  Real region_area(Region region) const {
    Real s = 0.0;
    for (Index t = 0; t < n_triangles(); ++t)
      if (region == Region::All || triangles[static_cast<std::size_t>(t)].tag == region)
        s += triangle_area(t);
    return s;
  }

  Real fibre_area() const { return region_area(Region::Fibre); }

  /// Coordinates of the canonical vertex carrying each DOF.
  std::vector<Vec2> dof_coordinates() const {
    std::vector<Vec2> coords(static_cast<std::size_t>(n_dofs));
    for (Index v = 0; v < n_vertices(); ++v) {
      Index d = dof_of_node[static_cast<std::size_t>(v)];
      bool ghost = false;
      for (const auto& p : periodic_pairs)
        if (p.first == v) { ghost = true; break; }
      if (!ghost) coords[static_cast<std::size_t>(d)] = vertices[static_cast<std::size_t>(v)];
    }
    return coords;
  }
};

namespace detail {

/// Fill a ring of 8q nodes from values on the fundamental 45-degree wedge,
/// mirroring coordinates exactly so the node set is bitwise invariant under
/// the dihedral group.  `f(k)` returns the wedge point for k = 0..q, where
/// k/q parametrises the angle from 0 to pi/4.
template <class F>
inline std::vector<Vec2> symmetric_ring(Index q, F&& f) {
  const Index n = 8 * q;
  std::vector<Vec2> pts(static_cast<std::size_t>(n));
  std::vector<bool> set(static_cast<std::size_t>(n), false);
  auto place = [&](Index idx, Real x, Real y) {
    idx = ((idx % n) + n) % n;
    if (!set[static_cast<std::size_t>(idx)]) {
      pts[static_cast<std::size_t>(idx)] = Vec2(x, y);
      set[static_cast<std::size_t>(idx)] = true;
    }
  };
  for (Index k = 0; k <= q; ++k) {
    const Vec2 p = f(k);
    const Real x = p.x(), y = p.y();
    place(k, x, y);
    place(2 * q - k, y, x);
    place(2 * q + k, -y, x);
    place(4 * q - k, -x, y);
    place(4 * q + k, -x, -y);
    place(6 * q - k, -y, -x);
    place(6 * q + k, y, -x);
    place(8 * q - k, x, -y);
  }
  return pts;
}

// Zigzag strip between two concentric node rings; tie angles advance the inner
// ring so the pattern is mirror-symmetric across shared rays.  Angle order is
// compared exactly in integers: (k_a+1)/nA vs (k_b+1)/nB.
inline void merge_rings(const std::vector<Index>& inner, const std::vector<Index>& outer,
                        std::vector<PeriodicMesh2D::Tri>& out, Region tag) {
  const Index nA = static_cast<Index>(inner.size());
  const Index nB = static_cast<Index>(outer.size());
  Index ka = 0, kb = 0;
  auto in = [&](Index k) { return inner[static_cast<std::size_t>(k % nA)]; };
  auto ou = [&](Index k) { return outer[static_cast<std::size_t>(k % nB)]; };
  while (ka < nA || kb < nB) {
    bool advance_outer;
    if (ka == nA) advance_outer = true;
    else if (kb == nB) advance_outer = false;
    else advance_outer = (kb + 1) * nA < (ka + 1) * nB;
    if (advance_outer) {
      out.push_back({{in(ka), ou(kb), ou(kb + 1)}, tag});
      ++kb;
    } else {
      out.push_back({{in(ka), ou(kb), in(ka + 1)}, tag});
      ++ka;
    }
  }
}

struct VertexKey {
  long long x, y;
  bool operator<(const VertexKey& o) const { return x < o.x || (x == o.x && y < o.y); }
};

inline VertexKey key_of(const Vec2& p) {
  // snap to a 1e-12 grid for exact-coordinate lookups
  return VertexKey{static_cast<long long>(std::llround(p.x() * 1e12)),
                   static_cast<long long>(std::llround(p.y() * 1e12))};
}

}  // namespace detail

inline PeriodicMesh2D build_cross_section_mesh(Real r, Real h) {
  if (!(r > 0.0) || !(r < 0.5)) throw ParameterError("build_cross_section_mesh: need 0 < r < 1/2");
  if (!(h > 0.0) || !(h <= 0.5 * r)) throw ParameterError("build_cross_section_mesh: need 0 < h <= r/2");

  PeriodicMesh2D m;
  m.r = r;
  m.h = h;

  const Index rings = std::max<Index>(2, static_cast<Index>(std::ceil(r / h - 1e-9)));
  const Index nring = 8 * rings;  // interface polygon node count

  auto add_vertex = [&](const Vec2& p) {
    m.vertices.push_back(p);
    return static_cast<Index>(m.vertices.size()) - 1;
  };

  // unit-circle direction at wedge parameter k/q; endpoints made exact
  auto wedge_dir = [](Index k, Index q) {
    if (k == 0) return Vec2(1.0, 0.0);
    const Real phi = 0.25 * kPi * static_cast<Real>(k) / static_cast<Real>(q);
    Real c = std::cos(phi), s = std::sin(phi);
    if (k == q) s = c;
    return Vec2(c, s);
  };

  // --- disk: centre + rings of 8j nodes at radius r*j/rings
  const Index centre = add_vertex(Vec2(0.0, 0.0));
  std::vector<std::vector<Index>> ring_ids(static_cast<std::size_t>(rings));
  for (Index j = 1; j <= rings; ++j) {
    const Real rho = r * static_cast<Real>(j) / static_cast<Real>(rings);
    auto pts = detail::symmetric_ring(j, [&](Index k) {
      const Vec2 d = wedge_dir(k, j);
      return Vec2(rho * d.x(), rho * d.y());
    });
    auto& ids = ring_ids[static_cast<std::size_t>(j - 1)];
    ids.reserve(pts.size());
    for (const auto& p : pts) ids.push_back(add_vertex(p));
  }
  for (Index k = 0; k < 8; ++k) {
    const auto& r1 = ring_ids[0];
    m.triangles.push_back({{centre, r1[static_cast<std::size_t>(k)],
                            r1[static_cast<std::size_t>((k + 1) % 8)]}, Region::Fibre});
  }
  for (Index j = 1; j < rings; ++j)
    detail::merge_rings(ring_ids[static_cast<std::size_t>(j - 1)],
                        ring_ids[static_cast<std::size_t>(j)], m.triangles, Region::Fibre);

  m.interface_nodes = ring_ids.back();

  // --- annulus: O-grid blend between the interface polygon and the cell boundary
  const Real dmax = 0.5 * std::sqrt(2.0) - r;
  const Index layers = std::max<Index>(1, static_cast<Index>(std::ceil(dmax / h - 1e-9)));
  std::vector<std::vector<Index>> layer_ids(static_cast<std::size_t>(layers + 1));
  layer_ids[0] = m.interface_nodes;
  for (Index l = 1; l <= layers; ++l) {
    const Real t = static_cast<Real>(l) / static_cast<Real>(layers);
    auto pts = detail::symmetric_ring(rings, [&](Index k) {
      const Vec2 d = wedge_dir(k, rings);
      // on the wedge |x| >= |y|, so the ray meets the square at x = 1/2
      const Vec2 sq(0.5, 0.5 * d.y() / d.x());
      Real x = (1.0 - t) * (r * d.x()) + t * sq.x();
      Real y = (1.0 - t) * (r * d.y()) + t * sq.y();
      if (l == layers) x = 0.5;  // boundary nodes exactly on the square
      return Vec2(x, y);
    });
    auto& ids = layer_ids[static_cast<std::size_t>(l)];
    ids.reserve(pts.size());
    for (const auto& p : pts) ids.push_back(add_vertex(p));
  }
  // quads split by their barycentre: symmetric under all reflections
  for (Index l = 0; l < layers; ++l) {
    const auto& lo = layer_ids[static_cast<std::size_t>(l)];
    const auto& hi = layer_ids[static_cast<std::size_t>(l + 1)];
    for (Index k = 0; k < nring; ++k) {
      const Index k1 = (k + 1) % nring;
      const Index a = lo[static_cast<std::size_t>(k)], b = lo[static_cast<std::size_t>(k1)];
      const Index c = hi[static_cast<std::size_t>(k1)], d = hi[static_cast<std::size_t>(k)];
      const Vec2 centre_q = 0.25 * (m.vertices[static_cast<std::size_t>(a)] +
                                    m.vertices[static_cast<std::size_t>(b)] +
                                    m.vertices[static_cast<std::size_t>(c)] +
                                    m.vertices[static_cast<std::size_t>(d)]);
      const Index q = add_vertex(centre_q);
      m.triangles.push_back({{a, b, q}, Region::Matrix});
      m.triangles.push_back({{b, c, q}, Region::Matrix});
      m.triangles.push_back({{c, d, q}, Region::Matrix});
      m.triangles.push_back({{d, a, q}, Region::Matrix});
    }
  }

  // enforce positive orientation
  for (Index t = 0; t < m.n_triangles(); ++t) {
    if (m.triangle_area(t) < 0.0)
      std::swap(m.triangles[static_cast<std::size_t>(t)].v[1],
                m.triangles[static_cast<std::size_t>(t)].v[2]);
    if (!(m.triangle_area(t) > 0.0))
      throw std::logic_error("build_cross_section_mesh: degenerate triangle");
  }

  // --- periodic identification of the +1/2 edges
  std::map<detail::VertexKey, Index> lookup;
  for (Index v = 0; v < m.n_vertices(); ++v) lookup[detail::key_of(m.vertices[static_cast<std::size_t>(v)])] = v;
  m.dof_of_node.assign(static_cast<std::size_t>(m.n_vertices()), -1);
  std::vector<Index> canonical(static_cast<std::size_t>(m.n_vertices()));
  for (Index v = 0; v < m.n_vertices(); ++v) {
    Vec2 p = m.vertices[static_cast<std::size_t>(v)];
    Vec2 q = p;
    if (q.x() > 0.5 - 1e-13) q.x() -= 1.0;
    if (q.y() > 0.5 - 1e-13) q.y() -= 1.0;
    if ((q - p).norm() > 1e-13) {
      auto it = lookup.find(detail::key_of(q));
      if (it == lookup.end())
        throw std::logic_error("build_cross_section_mesh: missing periodic partner");
      canonical[static_cast<std::size_t>(v)] = it->second;
      m.periodic_pairs.emplace_back(v, it->second);
    } else {
      canonical[static_cast<std::size_t>(v)] = v;
    }
  }
  Index next_dof = 0;
  for (Index v = 0; v < m.n_vertices(); ++v)
    if (canonical[static_cast<std::size_t>(v)] == v) m.dof_of_node[static_cast<std::size_t>(v)] = next_dof++;
  for (Index v = 0; v < m.n_vertices(); ++v)
    if (canonical[static_cast<std::size_t>(v)] != v)
      m.dof_of_node[static_cast<std::size_t>(v)] =
          m.dof_of_node[static_cast<std::size_t>(canonical[static_cast<std::size_t>(v)])];
  m.n_dofs = next_dof;
  return m;
}

/// Mesh of the disk alone, with a Dirichlet flag on the interface nodes.
/// Triangle order and vertex coordinates are copied from the parent so that
/// quadratures on B agree bit-for-bit between the two meshes.
struct DiskMesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<Index, 3>> triangles;
  std::vector<bool> on_boundary;
  std::vector<Index> parent_vertex;   // disk vertex -> parent vertex id
  std::vector<Index> parent_dof;      // disk vertex -> parent periodic DOF
  std::vector<Index> interior_nodes;  // disk vertex ids with on_boundary == false

  Index n_vertices() const { return static_cast<Index>(vertices.size()); }
  Index n_triangles() const { return static_cast<Index>(triangles.size()); }
  Index n_interior() const { return static_cast<Index>(interior_nodes.size()); }

  Real triangle_area(Index t) const {
    const auto& tr = triangles[static_cast<std::size_t>(t)];
    const Vec2& a = vertices[static_cast<std::size_t>(tr[0])];
    const Vec2& b = vertices[static_cast<std::size_t>(tr[1])];
    const Vec2& c = vertices[static_cast<std::size_t>(tr[2])];
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
  }

  Real area() const {
    Real s = 0.0;
    for (Index t = 0; t < n_triangles(); ++t) s += triangle_area(t);
    return s;
  }
};

inline DiskMesh fibre_submesh(const PeriodicMesh2D& m) {
  DiskMesh d;
  std::vector<Index> disk_id(static_cast<std::size_t>(m.n_vertices()), -1);
  std::vector<bool> is_interface(static_cast<std::size_t>(m.n_vertices()), false);
  for (Index v : m.interface_nodes) is_interface[static_cast<std::size_t>(v)] = true;
  for (const auto& tr : m.triangles) {
    if (tr.tag != Region::Fibre) continue;
    std::array<Index, 3> local{};
    for (int i = 0; i < 3; ++i) {
      Index pv = tr.v[static_cast<std::size_t>(i)];
      Index& id = disk_id[static_cast<std::size_t>(pv)];
      if (id < 0) {
        id = static_cast<Index>(d.vertices.size());
        d.vertices.push_back(m.vertices[static_cast<std::size_t>(pv)]);
        d.parent_vertex.push_back(pv);
        d.parent_dof.push_back(m.dof_of_node[static_cast<std::size_t>(pv)]);
        d.on_boundary.push_back(is_interface[static_cast<std::size_t>(pv)]);
      }
      local[static_cast<std::size_t>(i)] = id;
    }
    d.triangles.push_back(local);
  }
  for (Index v = 0; v < d.n_vertices(); ++v)
    if (!d.on_boundary[static_cast<std::size_t>(v)]) d.interior_nodes.push_back(v);
  return d;
}

// --- plain-text serialisation -------------------------------------------------

inline void write_mesh(std::ostream& os, const PeriodicMesh2D& m) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "mesh2d v1 r=%.17g h=%.17g\n", m.r, m.h);
  os << buf;
  for (const auto& v : m.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g\n", v.x(), v.y());
    os << buf;
  }
  for (const auto& t : m.triangles) {
    std::snprintf(buf, sizeof buf, "t %lld %lld %lld %c\n", static_cast<long long>(t.v[0]),
                  static_cast<long long>(t.v[1]), static_cast<long long>(t.v[2]),
                  t.tag == Region::Fibre ? 'F' : 'M');
    os << buf;
  }
  for (const auto& p : m.periodic_pairs) {
    std::snprintf(buf, sizeof buf, "p %lld %lld\n", static_cast<long long>(p.first),
                  static_cast<long long>(p.second));
    os << buf;
  }
}

inline PeriodicMesh2D read_mesh(std::istream& is) {
  PeriodicMesh2D m;
  std::string line;
  if (!std::getline(is, line)) throw IoError("read_mesh: empty stream");
  {
    std::istringstream hs(line);
    std::string magic, ver, rkv, hkv;
    hs >> magic >> ver >> rkv >> hkv;
    if (magic != "mesh2d" || ver != "v1" || rkv.rfind("r=", 0) != 0 || hkv.rfind("h=", 0) != 0)
      throw IoError("read_mesh: bad header: " + line);
    m.r = std::stod(rkv.substr(2));
    m.h = std::stod(hkv.substr(2));
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    char kind = 0;
    ls >> kind;
    if (kind == 'v') {
      Real x, y;
      ls >> x >> y;
      m.vertices.emplace_back(x, y);
    } else if (kind == 't') {
      long long a, b, c;
      char tag;
      ls >> a >> b >> c >> tag;
      m.triangles.push_back({{a, b, c}, tag == 'F' ? Region::Fibre : Region::Matrix});
    } else if (kind == 'p') {
      long long a, b;
      ls >> a >> b;
      m.periodic_pairs.emplace_back(a, b);
    } else {
      throw IoError("read_mesh: bad record: " + line);
    }
  }
  // rebuild DOF map and interface flags
  m.dof_of_node.assign(static_cast<std::size_t>(m.n_vertices()), -1);
  std::vector<Index> canonical(static_cast<std::size_t>(m.n_vertices()));
  for (Index v = 0; v < m.n_vertices(); ++v) canonical[static_cast<std::size_t>(v)] = v;
  for (const auto& p : m.periodic_pairs) canonical[static_cast<std::size_t>(p.first)] = p.second;
  Index next_dof = 0;
  for (Index v = 0; v < m.n_vertices(); ++v)
    if (canonical[static_cast<std::size_t>(v)] == v) m.dof_of_node[static_cast<std::size_t>(v)] = next_dof++;
  for (Index v = 0; v < m.n_vertices(); ++v)
    if (canonical[static_cast<std::size_t>(v)] != v)
      m.dof_of_node[static_cast<std::size_t>(v)] =
          m.dof_of_node[static_cast<std::size_t>(canonical[static_cast<std::size_t>(v)])];
  m.n_dofs = next_dof;
  for (Index v = 0; v < m.n_vertices(); ++v)
    if (std::abs(m.vertices[static_cast<std::size_t>(v)].norm() - m.r) < 1e-12)
      m.interface_nodes.push_back(v);
  return m;
}

}  // namespace fibrehom
