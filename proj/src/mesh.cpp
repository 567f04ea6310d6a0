#include "strang/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace strang {

namespace {

double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::size_t Cell::local_index(std::size_t f) const {
  auto it = std::find(faces.begin(), faces.end(), f);
  if (it == faces.end()) throw MeshError("face " + std::to_string(f) + " is not a face of this cell");
  return static_cast<std::size_t>(it - faces.begin());
}

Mesh Mesh::from_cells(std::vector<Point> vertices, std::vector<std::vector<std::size_t>> loops,
                      std::vector<int> subdomains, std::optional<std::vector<Point>> cell_points) {
  Mesh m;
  m.vertices_ = std::move(vertices);
  if (loops.empty()) throw MeshError("mesh has no cells");
  if (!subdomains.empty() && subdomains.size() != loops.size())
    throw MeshError("subdomain count does not match cell count");
  if (cell_points && cell_points->size() != loops.size())
    throw MeshError("cell point count does not match cell count");

  std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_to_face;
  m.cells_.resize(loops.size());
  for (std::size_t c = 0; c < loops.size(); ++c) {
    const auto& loop = loops[c];
    Cell& cell = m.cells_[c];
    if (loop.size() < 3) throw MeshError("cell " + std::to_string(c) + ": degenerate cell");
    std::set<std::size_t> distinct(loop.begin(), loop.end());
    if (distinct.size() != loop.size())
      throw MeshError("cell " + std::to_string(c) + ": degenerate cell (repeated vertex)");
    for (auto v : loop)
      if (v >= m.vertices_.size())
        throw MeshError("cell " + std::to_string(c) + ": vertex index " + std::to_string(v) +
                        " out of range");
    cell.vertices = loop;
    cell.subdomain = subdomains.empty() ? 0 : subdomains[c];
    if (cell.subdomain < 0) throw MeshError("cell " + std::to_string(c) + ": negative subdomain");

    // Shoelace area and centroid.
    const std::size_t n = loop.size();
    double area2 = 0.0;
    Point cen = Point::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const Point& a = m.vertices_[loop[i]];
      const Point& b = m.vertices_[loop[(i + 1) % n]];
      const double w = cross(a, b);
      area2 += w;
      cen += w * (a + b);
    }
    if (!(area2 > 0.0))
      throw MeshError("cell " + std::to_string(c) + ": orientation (non-positive signed area)");
    cell.measure = 0.5 * area2;
    cell.centroid = cen / (3.0 * area2);
    cell.point = cell_points ? (*cell_points)[c] : cell.centroid;
    double diam = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        diam = std::max(diam, (m.vertices_[loop[i]] - m.vertices_[loop[j]]).norm());
    cell.diameter = diam;

    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = loop[i], b = loop[(i + 1) % n];
      const auto key = std::minmax(a, b);
      auto it = edge_to_face.find({key.first, key.second});
      const Point e = m.vertices_[b] - m.vertices_[a];
      const Point outward = Point(e.y(), -e.x()).normalized();
      if (it == edge_to_face.end()) {
        Face face;
        face.vertices = {a, b};
        face.cells = {static_cast<int>(c), kNoCell};
        face.measure = e.norm();
        face.diameter = face.measure;
        face.centroid = 0.5 * (m.vertices_[a] + m.vertices_[b]);
        face.point = face.centroid;
        face.tangent = e / face.measure;
        face.normal = outward;
        edge_to_face.emplace(std::make_pair(key.first, key.second), m.faces_.size());
        cell.faces.push_back(m.faces_.size());
        m.faces_.push_back(face);
      } else {
        Face& face = m.faces_[it->second];
        if (face.cells[1] != kNoCell)
          throw MeshError("cell " + std::to_string(c) + ": non-manifold edge (" + std::to_string(a) +
                          "," + std::to_string(b) + ") shared by more than two cells");
        if (face.vertices[0] == a)
          throw MeshError("cell " + std::to_string(c) + ": orientation of edge (" + std::to_string(a) +
                          "," + std::to_string(b) + ") agrees with cell " +
                          std::to_string(face.cells[0]) + "; internal face normals disagree");
        face.cells[1] = static_cast<int>(c);
        cell.faces.push_back(it->second);
      }
      cell.normals.push_back(outward);
    }
  }
  for (std::size_t f = 0; f < m.faces_.size(); ++f)
    (m.faces_[f].is_boundary() ? m.boundary_faces_ : m.internal_faces_).push_back(f);
  m.compute_distances();
  m.validate();
  return m;
}

void Mesh::compute_distances() {
  for (auto& cell : cells_) {
    cell.distances.resize(cell.faces.size());
    for (std::size_t i = 0; i < cell.faces.size(); ++i) {
      const Point& a = vertices_[faces_[cell.faces[i]].vertices[0]];
      cell.distances[i] = (a - cell.point).dot(cell.normals[i]);
    }
  }
}

int Mesh::num_subdomains() const {
  int n = 0;
  for (const auto& c : cells_) n = std::max(n, c.subdomain + 1);
  return n;
}

Mesh Mesh::with_points(std::optional<std::vector<Point>> cell_points,
                       std::optional<std::vector<Point>> face_points) const {
  Mesh m = *this;
  if (cell_points) {
    if (cell_points->size() != cells_.size()) throw MeshError("cell point count mismatch");
    for (std::size_t c = 0; c < cells_.size(); ++c) m.cells_[c].point = (*cell_points)[c];
  }
  if (face_points) {
    if (face_points->size() != faces_.size()) throw MeshError("face point count mismatch");
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      const Face& face = faces_[f];
      const Point& p = (*face_points)[f];
      const Point a = vertices_[face.vertices[0]];
      const double s = (p - a).dot(face.tangent);
      if (std::abs((p - a).dot(face.normal)) > 1e-12 * face.measure || s < -1e-14 ||
          s > face.measure * (1 + 1e-14))
        throw MeshError("face " + std::to_string(f) + ": face point not on the face");
      m.faces_[f].point = p;
    }
  }
  m.compute_distances();
  m.validate();
  return m;
}

void Mesh::validate() const {
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const Cell& cell = cells_[c];
    const std::string tag = "cell " + std::to_string(c) + ": ";
    if (cell.vertices.size() < 3) throw MeshError(tag + "degenerate cell");
    if (!(cell.measure > 0.0)) throw MeshError(tag + "orientation (inverted cell)");
    Point closure = Point::Zero();
    double sum_d = 0.0;
    for (std::size_t i = 0; i < cell.faces.size(); ++i) {
      const Face& face = faces_[cell.faces[i]];
      closure += face.measure * cell.normals[i];
      if (!(cell.distances[i] > 0.0))
        throw MeshError(tag + "cell point not strictly inside (d_TF <= 0 for face " +
                        std::to_string(cell.faces[i]) + ")");
      sum_d += cell.distances[i] * face.measure;
      const int side = face.cells[0] == static_cast<int>(c) ? 0 : 1;
      if (face.cells[side] != static_cast<int>(c)) throw MeshError(tag + "face/cell incidence broken");
      const Point expected = side == 0 ? face.normal : Point(-face.normal);
      if ((expected - cell.normals[i]).norm() > 1e-12) throw MeshError(tag + "orientation of face normals");
    }
    if (closure.norm() > 1e-12 * cell.diameter) throw MeshError(tag + "polygon not closed");
    if (std::abs(sum_d - 2.0 * cell.measure) > 1e-10 * 2.0 * cell.measure)
      throw MeshError(tag + "sum of d_TF|F| differs from 2|T| (cell not star-shaped w.r.t. x_T)");
  }
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    const Face& face = faces_[f];
    if (!(face.measure > 0.0)) throw MeshError("face " + std::to_string(f) + ": zero length");
    if (face.cells[0] == kNoCell) throw MeshError("face " + std::to_string(f) + ": no incident cell");
    if (!face.is_boundary() && face.cells[0] >= face.cells[1])
      throw MeshError("face " + std::to_string(f) + ": orientation not in ascending cell order");
  }
}

bool Mesh::operator==(const Mesh& o) const {
  if (vertices_ != o.vertices_ || cells_.size() != o.cells_.size() || faces_.size() != o.faces_.size())
    return false;
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const auto &a = cells_[c], &b = o.cells_[c];
    if (a.vertices != b.vertices || a.subdomain != b.subdomain || a.point != b.point) return false;
  }
  for (std::size_t f = 0; f < faces_.size(); ++f)
    if (faces_[f].vertices != o.faces_[f].vertices || faces_[f].point != o.faces_[f].point) return false;
  return true;
}

Mesh build_cartesian(std::size_t nx, std::size_t ny, const Rectangle& domain, std::size_t n_subdomains_x) {
  if (nx == 0 || ny == 0) throw MeshError("cartesian mesh needs nx, ny >= 1");
  if (!(domain.x1 > domain.x0) || !(domain.y1 > domain.y0)) throw MeshError("degenerate rectangle");
  if (n_subdomains_x == 0 || nx % n_subdomains_x != 0)
    throw MeshError("subdomain strips must align with mesh columns (nx % n_subdomains_x != 0)");
  const double hx = (domain.x1 - domain.x0) / static_cast<double>(nx);
  const double hy = (domain.y1 - domain.y0) / static_cast<double>(ny);
  std::vector<Point> verts;
  verts.reserve((nx + 1) * (ny + 1));
  for (std::size_t j = 0; j <= ny; ++j)
    for (std::size_t i = 0; i <= nx; ++i)
      verts.emplace_back(i == nx ? domain.x1 : domain.x0 + hx * static_cast<double>(i),
                         j == ny ? domain.y1 : domain.y0 + hy * static_cast<double>(j));
  std::vector<std::vector<std::size_t>> cells;
  std::vector<int> sub;
  const std::size_t per_strip = nx / n_subdomains_x;
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t v = j * (nx + 1) + i;
      cells.push_back({v, v + 1, v + nx + 2, v + nx + 1});
      sub.push_back(static_cast<int>(i / per_strip));
    }
  return Mesh::from_cells(std::move(verts), std::move(cells), std::move(sub));
}

Mesh perturb(const Mesh& mesh, double amplitude, std::uint64_t seed) {
  if (!(amplitude >= 0.0 && amplitude < 0.5)) throw MeshError("perturbation amplitude must lie in [0, 0.5)");
  const std::size_t nv = mesh.num_vertices();
  std::vector<bool> fixed(nv, false);
  std::vector<double> min_len(nv, std::numeric_limits<double>::infinity());
  for (const Face& f : mesh.faces()) {
    const bool interface =
        !f.is_boundary() && mesh.cell(f.cells[0]).subdomain != mesh.cell(f.cells[1]).subdomain;
    for (auto v : f.vertices) {
      min_len[v] = std::min(min_len[v], f.measure);
      if (f.is_boundary() || interface) fixed[v] = true;
    }
  }
  std::mt19937_64 rng(seed);
  auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<Point> verts = mesh.vertices();
  for (std::size_t v = 0; v < nv; ++v) {
    // Draw for every vertex so that the stream does not depend on the fixed set.
    const double r = std::sqrt(unit());
    const double phi = 2.0 * std::numbers::pi * unit();
    if (fixed[v] || amplitude == 0.0) continue;
    verts[v] += amplitude * min_len[v] * r * Point(std::cos(phi), std::sin(phi));
  }
  std::vector<std::vector<std::size_t>> loops;
  std::vector<int> sub;
  for (const Cell& c : mesh.cells()) {
    loops.push_back(c.vertices);
    sub.push_back(c.subdomain);
  }
  try {
    return Mesh::from_cells(std::move(verts), std::move(loops), std::move(sub));
  } catch (const MeshError& e) {
    throw MeshError(std::string("perturbation produced an invalid mesh: ") + e.what());
  }
}

RegularityMetrics regularity_metrics(const Mesh& mesh) {
  RegularityMetrics r;
  for (const Cell& c : mesh.cells()) {
    r.h = std::max(r.h, c.diameter);
    double worst = 0.0;
    for (double d : c.distances) worst = std::max(worst, c.diameter / d);
    r.theta = std::max(r.theta, worst + static_cast<double>(c.num_faces()));
    r.max_faces_per_cell = std::max(r.max_faces_per_cell, c.num_faces());
  }
  for (std::size_t f : mesh.internal_faces()) {
    const Face& face = mesh.face(f);
    const Cell& a = mesh.cell(face.cells[0]);
    const Cell& b = mesh.cell(face.cells[1]);
    const double da = a.distances[a.local_index(f)];
    const double db = b.distances[b.local_index(f)];
    r.eta_jump = std::max(r.eta_jump, da / db + db / da);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Text format

namespace {

struct LineReader {
  std::istringstream in;
  std::size_t line_no = 0;

  explicit LineReader(const std::string& text) : in(text) {}

  // Next non-empty, comment-stripped line; false at end of input.
  bool next(std::string& out) {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      out = line;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw MeshError("line " + std::to_string(line_no) + ": " + what);
  }
};

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream s(line);
  std::vector<std::string> out;
  for (std::string t; s >> t;) out.push_back(t);
  return out;
}

template <class T>
T parse_number(const std::string& tok, LineReader& r) {
  T value{};
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) r.fail("malformed number '" + tok + "'");
  return value;
}

std::size_t section_count(const std::string& line, const std::string& name, LineReader& r) {
  auto t = tokens(line);
  if (t.size() != 2 || t[0] != name) r.fail("expected '" + name + " <count>'");
  return parse_number<std::size_t>(t[1], r);
}

}  // namespace

Mesh parse_mesh(const std::string& text) {
  LineReader r(text);
  std::string line;
  if (!r.next(line) || tokens(line) != std::vector<std::string>{"polymesh", "1"})
    r.fail("missing header 'polymesh 1'");
  if (!r.next(line)) r.fail("missing vertices section");
  const std::size_t nv = section_count(line, "vertices", r);
  std::vector<Point> verts(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    if (!r.next(line)) r.fail("unexpected end of file in vertices");
    auto t = tokens(line);
    if (t.size() != 2) r.fail("vertex line needs 'x y'");
    verts[i] = Point(parse_number<double>(t[0], r), parse_number<double>(t[1], r));
  }
  if (!r.next(line)) r.fail("missing cells section");
  const std::size_t nc = section_count(line, "cells", r);
  std::vector<std::vector<std::size_t>> loops(nc);
  std::vector<std::size_t> cell_lines(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    if (!r.next(line)) r.fail("unexpected end of file in cells");
    cell_lines[c] = r.line_no;
    for (const auto& t : tokens(line)) {
      const auto v = parse_number<std::size_t>(t, r);
      if (v >= nv) r.fail("vertex index " + t + " out of range");
      loops[c].push_back(v);
    }
    if (loops[c].size() < 3) r.fail("degenerate cell (fewer than 3 vertices)");
  }
  std::vector<int> sub;
  std::optional<std::vector<Point>> points;
  while (r.next(line)) {
    auto t = tokens(line);
    if (t.empty()) continue;
    if (t[0] == "subdomains") {
      if (section_count(line, "subdomains", r) != nc) r.fail("subdomains count must equal cell count");
      while (sub.size() < nc) {
        if (!r.next(line)) r.fail("unexpected end of file in subdomains");
        for (const auto& tok : tokens(line)) sub.push_back(parse_number<int>(tok, r));
      }
      if (sub.size() != nc) r.fail("too many subdomain entries");
    } else if (t[0] == "cellpoints") {
      if (section_count(line, "cellpoints", r) != nc) r.fail("cellpoints count must equal cell count");
      points.emplace();
      for (std::size_t c = 0; c < nc; ++c) {
        if (!r.next(line)) r.fail("unexpected end of file in cellpoints");
        auto p = tokens(line);
        if (p.size() != 2) r.fail("cell point line needs 'x y'");
        points->emplace_back(parse_number<double>(p[0], r), parse_number<double>(p[1], r));
      }
    } else {
      r.fail("unknown section '" + t[0] + "'");
    }
  }
  try {
    return Mesh::from_cells(std::move(verts), std::move(loops), std::move(sub), std::move(points));
  } catch (const MeshError& e) {
    // Attach the line of the offending cell when the message names one.
    const std::string msg = e.what();
    if (msg.rfind("cell ", 0) == 0) {
      const std::size_t c = std::stoul(msg.substr(5));
      if (c < cell_lines.size())
        throw MeshError("line " + std::to_string(cell_lines[c]) + ": " + msg);
    }
    throw;
  }
}

Mesh read_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_mesh(ss.str());
}

std::string format_mesh(const Mesh& mesh) {
  std::string out = "polymesh 1\nvertices " + std::to_string(mesh.num_vertices()) + "\n";
  for (const Point& p : mesh.vertices()) out += fmt_double(p.x()) + " " + fmt_double(p.y()) + "\n";
  out += "cells " + std::to_string(mesh.num_cells()) + "\n";
  bool custom_points = false;
  for (const Cell& c : mesh.cells()) {
    for (std::size_t i = 0; i < c.vertices.size(); ++i)
      out += (i ? " " : "") + std::to_string(c.vertices[i]);
    out += "\n";
    custom_points = custom_points || c.point != c.centroid;
  }
  out += "subdomains " + std::to_string(mesh.num_cells()) + "\n";
  for (const Cell& c : mesh.cells()) out += std::to_string(c.subdomain) + "\n";
  if (custom_points) {
    out += "cellpoints " + std::to_string(mesh.num_cells()) + "\n";
    for (const Cell& c : mesh.cells()) out += fmt_double(c.point.x()) + " " + fmt_double(c.point.y()) + "\n";
  }
  return out;
}

void write_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot write mesh file '" + path + "'");
  out << format_mesh(mesh);
}

}  // namespace strang
