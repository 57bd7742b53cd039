#include "hrve/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace hrve {

static_assert(std::endian::native == std::endian::little,
              "snapshot I/O assumes a little-endian host");

namespace {

constexpr char kMagic[5] = {'H', 'R', 'V', 'E', '1'};

template <class T> void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T> T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) fail(ErrorCode::io, "snapshot truncated");
  return v;
}

void write_header(std::ostream& os, const GridSpec& g, SnapshotRole role, double lambda,
                  double epsilon) {
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, std::uint32_t(g.d));
  for (int k = 0; k < g.d; ++k) put<std::uint32_t>(os, std::uint32_t(g.n[k]));
  put<std::uint8_t>(os, std::uint8_t(std::uint8_t(g.topology) | (std::uint8_t(role) << 4)));
  put<double>(os, lambda);
  put<double>(os, epsilon);
}

void write_values(std::ostream& os, const std::vector<double>& v) {
  os.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
  if (!os) fail(ErrorCode::io, "snapshot write failed");
}

} // namespace

const char* to_string(SnapshotRole r) noexcept {
  switch (r) {
  case SnapshotRole::coefficient: return "coefficient";
  case SnapshotRole::corrector: return "corrector";
  case SnapshotRole::box_corrector: return "box-corrector";
  case SnapshotRole::boundary_layer: return "boundary-layer";
  }
  return "?";
}

void write_snapshot(std::ostream& os, const CoefficientField& a) {
  write_header(os, a.grid, SnapshotRole::coefficient, a.lambda, a.epsilon);
  write_values(os, a.entries);
}

void write_snapshot(std::ostream& os, const ScalarField& u, SnapshotRole role, double lambda,
                    double epsilon) {
  require(role != SnapshotRole::coefficient, ErrorCode::invalid_argument,
          "scalar snapshots need a corrector role");
  write_header(os, u.grid, role, lambda, epsilon);
  write_values(os, u.values);
}

Snapshot read_snapshot(std::istream& is) {
  char magic[5];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    fail(ErrorCode::io, "not an HRVE1 snapshot");
  GridSpec g;
  g.d = int(get<std::uint32_t>(is));
  if (g.d != 2 && g.d != 3) fail(ErrorCode::io, "snapshot dimension must be 2 or 3");
  for (int k = 0; k < g.d; ++k) g.n[k] = int(get<std::uint32_t>(is));
  const auto code = get<std::uint8_t>(is);
  const int topo = code & 0x0f, role = code >> 4;
  if (topo > 2) fail(ErrorCode::io, "unknown topology code in snapshot");
  if (role > 3) fail(ErrorCode::io, "unknown role tag in snapshot");
  g.topology = Topology(topo);
  g.h = 1.0;
  try {
    g.validate();
  } catch (const Error& e) {
    fail(ErrorCode::io, std::string("snapshot grid: ") + e.what());
  }

  Snapshot s;
  s.role = SnapshotRole(role);
  s.lambda = get<double>(is);
  s.epsilon = get<double>(is);
  const std::size_t per_cell =
      s.role == SnapshotRole::coefficient ? std::size_t(CoefficientField::components(g.d)) : 1;
  std::vector<double> v(g.cells() * per_cell);
  is.read(reinterpret_cast<char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
  if (!is) fail(ErrorCode::io, "snapshot truncated");
  if (s.role == SnapshotRole::coefficient) {
    s.field.grid = g;
    s.field.entries = std::move(v);
    s.field.lambda = s.lambda;
    s.field.epsilon = s.epsilon;
  } else {
    s.scalar = ScalarField(g);
    s.scalar.values = std::move(v);
  }
  return s;
}

void save_field(const std::string& path, const CoefficientField& a) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::io, "cannot open " + path + " for writing");
  write_snapshot(os, a);
}

void save_scalar(const std::string& path, const ScalarField& u, SnapshotRole role,
                 double lambda, double epsilon) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::io, "cannot open " + path + " for writing");
  write_snapshot(os, u, role, lambda, epsilon);
}

Snapshot load_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::io, "cannot open " + path);
  return read_snapshot(is);
}

CoefficientField load_field(const std::string& path) {
  Snapshot s = load_snapshot(path);
  require(s.role == SnapshotRole::coefficient, ErrorCode::io,
          path + " holds a " + to_string(s.role) + " snapshot, not a coefficient field");
  return std::move(s.field);
}

} // namespace hrve
