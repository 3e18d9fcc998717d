#include "nanoflood/grid.hpp"

#include <algorithm>
#include <sstream>

namespace nanoflood {

const char* edge_name(Edge e) {
  switch (e) {
    case Edge::left: return "left";
    case Edge::right: return "right";
    case Edge::bottom: return "bottom";
    case Edge::top: return "top";
  }
  return "?";
}

namespace {

// Maps edge index -> segment id for every face of one edge, validating that
// the user's segments cover the edge exactly once.
std::vector<int> resolve_edge_coverage(const std::vector<BoundarySegment>& segments,
                                       Edge edge, int count) {
  struct Range {
    int lo, hi, seg;
  };
  std::vector<Range> ranges;
  for (int s = 0; s < static_cast<int>(segments.size()); ++s) {
    if (segments[s].edge != edge) continue;
    int lo = segments[s].lo;
    int hi = segments[s].hi < 0 ? count : segments[s].hi;
    if (lo < 0 || hi > count || lo >= hi) {
      std::ostringstream os;
      os << "boundary segment on edge '" << edge_name(edge) << "' has invalid range ["
         << lo << ", " << hi << ") for edge of length " << count;
      throw ConfigError(os.str());
    }
    ranges.push_back({lo, hi, s});
  }
  std::sort(ranges.begin(), ranges.end(),
            [](const Range& a, const Range& b) { return a.lo < b.lo; });
  std::vector<int> cover(count, -1);
  int at = 0;
  for (const Range& r : ranges) {
    if (r.lo != at) {
      std::ostringstream os;
      os << "boundary coverage on edge '" << edge_name(edge) << "' is "
         << (r.lo < at ? "overlapping" : "incomplete") << " near index "
         << std::min(r.lo, at);
      throw ConfigError(os.str());
    }
    for (int k = r.lo; k < r.hi; ++k) cover[k] = r.seg;
    at = r.hi;
  }
  if (at != count) {
    std::ostringstream os;
    os << "boundary coverage on edge '" << edge_name(edge)
       << "' is incomplete: faces [" << at << ", " << count << ") have no segment";
    throw ConfigError(os.str());
  }
  return cover;
}

}  // namespace

StructuredGrid2D StructuredGrid2D::build(int nx, int ny, double lx, double ly,
                                         std::vector<BoundarySegment> segments) {
  if (nx < 1 || ny < 1) throw ConfigError("grid must have nx >= 1 and ny >= 1");
  if (!(lx > 0.0) || !(ly > 0.0)) throw ConfigError("grid extents must be positive");

  StructuredGrid2D g;
  g.nx_ = nx;
  g.ny_ = ny;
  g.lx_ = lx;
  g.ly_ = ly;
  g.dx_ = lx / nx;
  g.dy_ = ly / ny;
  g.segments_ = std::move(segments);

  const auto left = resolve_edge_coverage(g.segments_, Edge::left, ny);
  const auto right = resolve_edge_coverage(g.segments_, Edge::right, ny);
  const auto bottom = resolve_edge_coverage(g.segments_, Edge::bottom, nx);
  const auto top = resolve_edge_coverage(g.segments_, Edge::top, nx);
  for (const BoundarySegment& s : g.segments_) {
    if (s.kind == BcKind::dirichlet_pressure) g.has_dirichlet_ = true;
  }

  const int nxf = (nx + 1) * ny;  // x-normal faces come first
  g.faces_.resize(nxf + nx * (ny + 1));

  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      Face& f = g.faces_[j * (nx + 1) + i];
      f.axis = 0;
      f.area = g.dy_;
      if (i == 0) {
        f.owner = g.cell_id(0, j);
        f.dist = 0.5 * g.dx_;
        f.segment = left[j];
        f.axis_sign = -1;
      } else if (i == nx) {
        f.owner = g.cell_id(nx - 1, j);
        f.dist = 0.5 * g.dx_;
        f.segment = right[j];
        f.axis_sign = 1;
      } else {
        f.owner = g.cell_id(i - 1, j);
        f.neighbor = g.cell_id(i, j);
        f.dist = g.dx_;
        f.axis_sign = 1;
      }
    }
  }
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      Face& f = g.faces_[nxf + j * nx + i];
      f.axis = 1;
      f.area = g.dx_;
      if (j == 0) {
        f.owner = g.cell_id(i, 0);
        f.dist = 0.5 * g.dy_;
        f.segment = bottom[i];
        f.axis_sign = -1;
      } else if (j == ny) {
        f.owner = g.cell_id(i, ny - 1);
        f.dist = 0.5 * g.dy_;
        f.segment = top[i];
        f.axis_sign = 1;
      } else {
        f.owner = g.cell_id(i, j - 1);
        f.neighbor = g.cell_id(i, j);
        f.dist = g.dy_;
        f.axis_sign = 1;
      }
    }
  }

  g.cell_faces_.resize(g.num_cells());
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      auto& cf = g.cell_faces_[g.cell_id(i, j)];
      cf[0] = j * (nx + 1) + i;            // west
      cf[1] = j * (nx + 1) + i + 1;        // east
      cf[2] = nxf + j * nx + i;            // south
      cf[3] = nxf + (j + 1) * nx + i;      // north
    }
  }

  // Interior faces in row-major owner order, x-face before y-face.
  for (int c = 0; c < g.num_cells(); ++c) {
    const int i = g.cell_i(c), j = g.cell_j(c);
    if (i < nx - 1) g.interior_.push_back(g.cell_faces_[c][1]);
    if (j < ny - 1) g.interior_.push_back(g.cell_faces_[c][3]);
  }
  for (int f = 0; f < g.num_faces(); ++f) {
    if (!g.faces_[f].interior()) g.boundary_.push_back(f);
  }
  return g;
}

void StructuredGrid2D::face_center(int f, double& x, double& y) const {
  const int nxf = (nx_ + 1) * ny_;
  if (f < nxf) {
    const int j = f / (nx_ + 1), i = f % (nx_ + 1);
    x = i * dx_;
    y = (j + 0.5) * dy_;
  } else {
    const int r = f - nxf;
    const int j = r / nx_, i = r % nx_;
    x = (i + 0.5) * dx_;
    y = j * dy_;
  }
}

}  // namespace nanoflood
