#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nanoflood/common.hpp"

namespace nanoflood {

enum class Edge : int { left = 0, right = 1, bottom = 2, top = 3 };

const char* edge_name(Edge e);

enum class BcKind { no_flow, dirichlet_pressure, neumann_flux };

/// One boundary condition applied to a contiguous range of faces on one edge.
/// The range [lo, hi) indexes cells along the edge (j for left/right, i for
/// bottom/top); hi == -1 means "to the end of the edge".
struct BoundarySegment {
  Edge edge = Edge::left;
  int lo = 0;
  int hi = -1;
  BcKind kind = BcKind::no_flow;
  double pressure = 0.0;             // [Pa] dirichlet_pressure value
  double inflow_velocity = 0.0;      // [m/s] neumann_flux, positive into the domain
  double inflow_saturation = 1.0;    // water saturation carried by inflow
  double inflow_concentration = 0.0; // particle concentration carried by inflow
};

/// A cell face. Interior faces are oriented from owner to neighbor, where
/// owner always has the smaller cell id; boundary faces (neighbor == -1) are
/// oriented outward. `axis_sign` is +1 when that orientation points along
/// +x/+y and -1 otherwise (left/bottom boundary faces).
struct Face {
  int owner = -1;
  int neighbor = -1;
  double area = 0.0;   // [m^2] per unit thickness
  double dist = 0.0;   // [m] center-to-center, or center-to-face on the boundary
  int axis = 0;        // 0 = x, 1 = y
  int segment = -1;    // boundary segment index, -1 for interior faces
  std::int8_t axis_sign = 1;

  bool interior() const { return neighbor >= 0; }
};

/// Uniform cell-centered rectangular grid with face connectivity and a
/// validated boundary-condition layout. Immutable after construction.
class StructuredGrid2D {
 public:
  static StructuredGrid2D build(int nx, int ny, double lx, double ly,
                                std::vector<BoundarySegment> segments);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int num_cells() const { return nx_ * ny_; }
  int num_faces() const { return static_cast<int>(faces_.size()); }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double dx() const { return dx_; }
  double dy() const { return dy_; }
  double cell_volume() const { return dx_ * dy_; }  // per unit thickness

  int cell_id(int i, int j) const { return j * nx_ + i; }
  int cell_i(int c) const { return c % nx_; }
  int cell_j(int c) const { return c / nx_; }
  double cell_x(int c) const { return (cell_i(c) + 0.5) * dx_; }
  double cell_y(int c) const { return (cell_j(c) + 0.5) * dy_; }

  const std::vector<Face>& faces() const { return faces_; }
  const Face& face(int f) const { return faces_[f]; }

  /// Interior face ids ordered row-major by owner cell, x-face before y-face.
  const std::vector<int>& interior_faces() const { return interior_; }
  const std::vector<int>& boundary_faces() const { return boundary_; }

  /// Face ids around a cell in the fixed order {west, east, south, north}.
  const std::array<int, 4>& cell_faces(int c) const { return cell_faces_[c]; }

  const std::vector<BoundarySegment>& segments() const { return segments_; }
  const BoundarySegment& face_segment(const Face& f) const {
    return segments_[f.segment];
  }

  /// Midpoint of a face (used for gravity potentials on boundary faces).
  void face_center(int f, double& x, double& y) const;

  bool has_dirichlet() const { return has_dirichlet_; }

 private:
  StructuredGrid2D() = default;

  int nx_ = 0, ny_ = 0;
  double lx_ = 0, ly_ = 0, dx_ = 0, dy_ = 0;
  std::vector<Face> faces_;
  std::vector<int> interior_;
  std::vector<int> boundary_;
  std::vector<std::array<int, 4>> cell_faces_;
  std::vector<BoundarySegment> segments_;
  bool has_dirichlet_ = false;
};

}  // namespace nanoflood
