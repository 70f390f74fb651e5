#include "cardiosynth/core/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace cardiosynth::nifti {

namespace {

#pragma pack(push, 1)
struct Header {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code, sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4], srow_y[4], srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Header) == 348);

enum Datatype : std::int16_t {
  DT_UINT8 = 2,
  DT_INT16 = 4,
  DT_INT32 = 8,
  DT_FLOAT32 = 16,
  DT_FLOAT64 = 64,
  DT_INT8 = 256,
  DT_UINT16 = 512,
  DT_UINT32 = 768,
  DT_INT64 = 1024,
  DT_UINT64 = 1280,
};

bool is_integer_type(std::int16_t dt) {
  switch (dt) {
    case DT_UINT8: case DT_INT16: case DT_INT32: case DT_INT8: case DT_UINT16: case DT_UINT32:
    case DT_INT64: case DT_UINT64: return true;
    default: return false;
  }
}

int bytes_per_voxel(std::int16_t dt) {
  switch (dt) {
    case DT_UINT8: case DT_INT8: return 1;
    case DT_INT16: case DT_UINT16: return 2;
    case DT_INT32: case DT_UINT32: case DT_FLOAT32: return 4;
    case DT_FLOAT64: case DT_INT64: case DT_UINT64: return 8;
    default: throw FormatError("unsupported NIfTI datatype " + std::to_string(dt));
  }
}

bool is_gz(const std::string& path) { return path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0; }

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::vector<std::uint8_t> bytes;
  if (is_gz(path)) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw ConfigError("cannot open '" + path + "'");
    std::uint8_t buf[1 << 16];
    int n = 0;
    while ((n = gzread(f, buf, sizeof buf)) > 0) bytes.insert(bytes.end(), buf, buf + n);
    const bool bad = n < 0;
    gzclose(f);
    if (bad) throw FormatError("'" + path + "': gzip stream is corrupt");
    return bytes;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  if (is_gz(path)) {
    gzFile f = gzopen(path.c_str(), "wb6");
    if (!f) throw Error("cannot write '" + path + "'");
    const int n = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(f);
    if (n != static_cast<int>(bytes.size())) throw Error("failed writing '" + path + "'");
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

template <typename T>
T byteswap_value(T v) {
  auto* p = reinterpret_cast<std::uint8_t*>(&v);
  std::reverse(p, p + sizeof(T));
  return v;
}

void swap_header(Header& h) {
  auto sw = [](auto& x) { x = byteswap_value(x); };
  sw(h.sizeof_hdr);
  sw(h.extents);
  sw(h.session_error);
  for (auto& d : h.dim) sw(d);
  sw(h.intent_p1); sw(h.intent_p2); sw(h.intent_p3);
  sw(h.intent_code); sw(h.datatype); sw(h.bitpix); sw(h.slice_start);
  for (auto& p : h.pixdim) sw(p);
  sw(h.vox_offset); sw(h.scl_slope); sw(h.scl_inter); sw(h.slice_end);
  sw(h.cal_max); sw(h.cal_min); sw(h.slice_duration); sw(h.toffset);
  sw(h.glmax); sw(h.glmin);
  sw(h.qform_code); sw(h.sform_code);
  sw(h.quatern_b); sw(h.quatern_c); sw(h.quatern_d);
  sw(h.qoffset_x); sw(h.qoffset_y); sw(h.qoffset_z);
  for (int i = 0; i < 4; ++i) { sw(h.srow_x[i]); sw(h.srow_y[i]); sw(h.srow_z[i]); }
}

struct Raw {
  Header header;
  Shape3 shape;
  Spacing spacing;
  Phase phase = Phase::none;
  std::string subject;
  bool normalized = false;
  std::vector<double> values;
};

double read_scalar(const std::uint8_t* p, std::int16_t dt, bool swap) {
  auto get = [&]<typename T>(T) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    if (swap) v = byteswap_value(v);
    return static_cast<double>(v);
  };
  switch (dt) {
    case DT_UINT8: return get(std::uint8_t{});
    case DT_INT8: return get(std::int8_t{});
    case DT_INT16: return get(std::int16_t{});
    case DT_UINT16: return get(std::uint16_t{});
    case DT_INT32: return get(std::int32_t{});
    case DT_UINT32: return get(std::uint32_t{});
    case DT_INT64: return get(std::int64_t{});
    case DT_UINT64: return get(std::uint64_t{});
    case DT_FLOAT32: return get(float{});
    case DT_FLOAT64: return get(double{});
    default: throw FormatError("unsupported NIfTI datatype " + std::to_string(dt));
  }
}

void parse_descrip(const Header& h, Raw& raw) {
  std::string d(h.descrip, strnlen(h.descrip, sizeof h.descrip));
  std::size_t pos = 0;
  while (pos < d.size()) {
    auto semi = d.find(';', pos);
    if (semi == std::string::npos) semi = d.size();
    const std::string item = d.substr(pos, semi - pos);
    const auto eq = item.find('=');
    if (eq != std::string::npos) {
      const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
      if (key == "phase") {
        try {
          raw.phase = phase_from_string(value);
        } catch (const ConfigError&) {
          raw.phase = Phase::none;
        }
      } else if (key == "subject") {
        raw.subject = value;
      } else if (key == "norm") {
        raw.normalized = value == "1";
      }
    }
    pos = semi + 1;
  }
}

Raw read_raw(const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < sizeof(Header)) throw FormatError("'" + path + "': too short for a NIfTI-1 header");
  Raw raw;
  std::memcpy(&raw.header, bytes.data(), sizeof(Header));
  Header& h = raw.header;
  bool swap = false;
  if (h.sizeof_hdr != 348) {
    swap_header(h);
    swap = true;
    if (h.sizeof_hdr != 348) throw FormatError("'" + path + "': not a NIfTI-1 file");
  }
  if (std::memcmp(h.magic, "n+1", 4) != 0) throw FormatError("'" + path + "': only single-file NIfTI-1 is supported");
  const int ndim = h.dim[0];
  if (ndim < 1 || ndim > 7) throw FormatError("'" + path + "': invalid dim[0]");
  for (int i = 4; i <= ndim; ++i)
    if (h.dim[i] > 1) throw FormatError("'" + path + "': 4D and higher volumes are not supported");
  auto dim_or_one = [&](int i) { return i <= ndim ? std::max<int>(1, h.dim[i]) : 1; };
  raw.shape = {dim_or_one(3), dim_or_one(2), dim_or_one(1)};
  auto pix = [&](int i) {
    const double p = i <= ndim ? std::fabs(static_cast<double>(h.pixdim[i])) : 1.0;
    return p > 0.0 ? p : 1.0;
  };
  raw.spacing = Spacing(pix(2), pix(1), pix(3));
  parse_descrip(h, raw);

  const std::size_t n = raw.shape.voxels();
  const int bpv = bytes_per_voxel(h.datatype);
  const auto offset = static_cast<std::size_t>(h.vox_offset < 352.0f ? 352.0f : h.vox_offset);
  if (bytes.size() < offset + n * static_cast<std::size_t>(bpv)) throw FormatError("'" + path + "': data truncated");
  raw.values.resize(n);
  const std::uint8_t* p = bytes.data() + offset;
  for (std::size_t i = 0; i < n; ++i) raw.values[i] = read_scalar(p + i * static_cast<std::size_t>(bpv), h.datatype, swap);
  return raw;
}

Header make_header(Shape3 shape, const Spacing& sp, std::int16_t datatype, Phase phase, const std::string& subject,
                   bool normalized) {
  if (shape.cols > 32767 || shape.rows > 32767 || shape.slices > 32767)
    throw ShapeError("volume too large for NIfTI-1 dims");
  Header h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  h.dim[1] = static_cast<std::int16_t>(shape.cols);
  h.dim[2] = static_cast<std::int16_t>(shape.rows);
  h.dim[3] = static_cast<std::int16_t>(shape.slices);
  for (int i = 4; i < 8; ++i) h.dim[i] = 1;
  h.datatype = datatype;
  h.bitpix = static_cast<std::int16_t>(8 * bytes_per_voxel(datatype));
  h.pixdim[0] = 1.0f;
  h.pixdim[1] = static_cast<float>(sp.col_mm);
  h.pixdim[2] = static_cast<float>(sp.row_mm);
  h.pixdim[3] = static_cast<float>(sp.slice_mm);
  for (int i = 4; i < 8; ++i) h.pixdim[i] = 1.0f;
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.xyzt_units = 2;  // mm
  std::string d = "phase=" + std::string(to_string(phase));
  if (normalized) d += ";norm=1";
  d += ";subject=" + subject;
  std::strncpy(h.descrip, d.c_str(), sizeof h.descrip - 1);
  h.sform_code = 1;
  h.srow_x[0] = h.pixdim[1];
  h.srow_y[1] = h.pixdim[2];
  h.srow_z[2] = h.pixdim[3];
  std::memcpy(h.magic, "n+1", 4);
  return h;
}

template <typename T>
void write_raw(const std::string& path, const Header& h, const std::vector<T>& values) {
  std::vector<std::uint8_t> bytes(352 + values.size() * sizeof(T), 0);
  std::memcpy(bytes.data(), &h, sizeof h);
  std::memcpy(bytes.data() + 352, values.data(), values.size() * sizeof(T));
  write_file(path, bytes);
}

}  // namespace

Volume read_volume(const std::string& path) {
  Raw raw = read_raw(path);
  Volume v;
  v.spacing = raw.spacing;
  v.phase = raw.phase;
  v.subject_id = raw.subject;
  const double slope = raw.header.scl_slope == 0.0f ? 1.0 : raw.header.scl_slope;
  const double inter = raw.header.scl_inter;
  for (auto& x : raw.values) x = x * slope + inter;
  v.voxels = Grid3<double>(raw.shape, std::move(raw.values));
  v.normalized = raw.normalized;
  return v;
}

LabelMap read_labels(const std::string& path, SchemeKind scheme) {
  Raw raw = read_raw(path);
  if (!is_integer_type(raw.header.datatype))
    throw FormatError("'" + path + "': label files must use an integer datatype");
  const int n = LabelScheme::of(scheme).num_classes();
  std::vector<std::uint8_t> ids(raw.values.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double x = raw.values[i];
    if (x < 0 || x >= n) throw FormatError("'" + path + "': label id " + std::to_string(x) + " outside scheme");
    ids[i] = static_cast<std::uint8_t>(x);
  }
  LabelMap m;
  m.labels = Grid3<std::uint8_t>(raw.shape, std::move(ids));
  m.scheme = scheme;
  m.spacing = raw.spacing;
  m.phase = raw.phase;
  m.subject_id = raw.subject;
  return m;
}

void write_volume(const Volume& vol, const std::string& path) {
  const Header h = make_header(vol.shape(), vol.spacing, DT_FLOAT32, vol.phase, vol.subject_id, vol.normalized);
  std::vector<float> values(vol.voxels.values().begin(), vol.voxels.values().end());
  write_raw(path, h, values);
}

void write_labels(const LabelMap& labels, const std::string& path) {
  const Header h = make_header(labels.shape(), labels.spacing, DT_UINT8, labels.phase, labels.subject_id, false);
  write_raw(path, h, labels.labels.values());
}

}  // namespace cardiosynth::nifti
