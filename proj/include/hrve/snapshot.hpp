#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "hrve/ensemble.hpp"

namespace hrve {

/// What a snapshot payload holds. Stored in the upper nibble of the
/// topology byte; a plain coefficient field has role 0, so coefficient
/// snapshots read as the bare format.
enum class SnapshotRole : std::uint8_t {
  coefficient = 0,
  corrector = 1,      // periodic phi_i
  box_corrector = 2,  // Dirichlet phi^L_i
  boundary_layer = 3, // theta^T_i
};

const char* to_string(SnapshotRole r) noexcept;

/// Header: "HRVE1", u32 d, u32 n per axis (d values), u8 topology | role << 4,
/// f64 lambda, f64 epsilon. Coefficient payload: d(d+1)/2 f64 per cell in
/// row-major cell order (upper triangle per cell). Scalar roles carry one
/// f64 per cell. Little-endian.
void write_snapshot(std::ostream& os, const CoefficientField& a);
void write_snapshot(std::ostream& os, const ScalarField& u, SnapshotRole role,
                    double lambda, double epsilon);

void save_field(const std::string& path, const CoefficientField& a);
void save_scalar(const std::string& path, const ScalarField& u, SnapshotRole role,
                 double lambda, double epsilon);

struct Snapshot {
  SnapshotRole role = SnapshotRole::coefficient;
  CoefficientField field; // role == coefficient
  ScalarField scalar;     // scalar roles
  double lambda = 1.0;
  double epsilon = 1.0;
};

Snapshot read_snapshot(std::istream& is);
Snapshot load_snapshot(const std::string& path);
/// Throws unless the file holds a coefficient field.
CoefficientField load_field(const std::string& path);

} // namespace hrve
