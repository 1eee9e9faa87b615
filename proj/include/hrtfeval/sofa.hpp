#pragma once

// Optional AES69 (SOFA) SimpleFreeFieldHRIR reader on top of the HDF5 C API.
// Link against HDF5 when including this header.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <hdf5.h>

#include "hrtfeval/core.hpp"
#include "hrtfeval/error.hpp"

namespace hrtfeval::sofa {

namespace detail {

class Handle {
 public:
  using Closer = herr_t (*)(hid_t);
  Handle(hid_t id, Closer closer) : id_(id), closer_(closer) {}
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() {
    if (id_ >= 0) closer_(id_);
  }
  hid_t get() const { return id_; }
  bool valid() const { return id_ >= 0; }

 private:
  hid_t id_;
  Closer closer_;
};

inline std::optional<std::string> read_string_attribute(hid_t obj, const char* name) {
  if (H5Aexists(obj, name) <= 0) return std::nullopt;
  Handle attr(H5Aopen(obj, name, H5P_DEFAULT), H5Aclose);
  if (!attr.valid()) return std::nullopt;
  Handle type(H5Aget_type(attr.get()), H5Tclose);
  if (H5Tget_class(type.get()) != H5T_STRING) return std::nullopt;
  std::string out;
  if (H5Tis_variable_str(type.get()) > 0) {
    Handle mem(H5Tcopy(H5T_C_S1), H5Tclose);
    H5Tset_size(mem.get(), H5T_VARIABLE);
    H5Tset_cset(mem.get(), H5Tget_cset(type.get()));
    char* raw = nullptr;
    if (H5Aread(attr.get(), mem.get(), &raw) < 0) return std::nullopt;
    if (raw) out = raw;
    Handle space(H5Aget_space(attr.get()), H5Sclose);
    H5Dvlen_reclaim(mem.get(), space.get(), H5P_DEFAULT, &raw);
  } else {
    const std::size_t size = H5Tget_size(type.get());
    std::string buf(size, '\0');
    if (H5Aread(attr.get(), type.get(), buf.data()) < 0) return std::nullopt;
    out = buf.substr(0, buf.find('\0'));
  }
  while (!out.empty() && (out.back() == ' ' || out.back() == '\0')) out.pop_back();
  return out;
}

struct Array {
  std::vector<double> values;
  std::vector<hsize_t> dims;
};

inline Array read_dataset(hid_t file, const char* name) {
  if (H5Lexists(file, name, H5P_DEFAULT) <= 0) {
    throw Error(ErrorCode::MissingVariable, std::string("SOFA variable '") + name + "' is absent");
  }
  Handle ds(H5Dopen2(file, name, H5P_DEFAULT), H5Dclose);
  if (!ds.valid()) throw Error(ErrorCode::MissingVariable, std::string("cannot open SOFA variable '") + name + "'");
  Handle space(H5Dget_space(ds.get()), H5Sclose);
  const int rank = H5Sget_simple_extent_ndims(space.get());
  Array a;
  a.dims.resize(static_cast<std::size_t>(rank > 0 ? rank : 0));
  if (rank > 0) H5Sget_simple_extent_dims(space.get(), a.dims.data(), nullptr);
  hsize_t total = 1;
  for (hsize_t d : a.dims) total *= d;
  a.values.resize(total);
  if (total > 0 && H5Dread(ds.get(), H5T_NATIVE_DOUBLE, H5S_ALL, H5S_ALL, H5P_DEFAULT, a.values.data()) < 0) {
    throw Error(ErrorCode::MissingVariable, std::string("cannot read SOFA variable '") + name + "' as numbers");
  }
  return a;
}

}  // namespace detail

/// Reads a SimpleFreeFieldHRIR file. Source positions may be spherical
/// (degrees, CCW azimuth) or cartesian; `convention_hint` names the expected
/// SOFAConventions value and defaults to SimpleFreeFieldHRIR.
inline HrirSet import_sofa(const std::filesystem::path& path,
                           const std::string& convention_hint = "SimpleFreeFieldHRIR") {
  H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr);
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  detail::Handle file(H5Fopen(path.string().c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), H5Fclose);
  if (!file.valid()) throw Error(ErrorCode::UnsupportedConvention, "'" + path.string() + "' is not an HDF5 container");

  const auto conventions = detail::read_string_attribute(file.get(), "Conventions");
  if (conventions && *conventions != "SOFA") {
    throw Error(ErrorCode::UnsupportedConvention, "Conventions is '" + *conventions + "', expected SOFA");
  }
  const auto sofa_conv = detail::read_string_attribute(file.get(), "SOFAConventions");
  if (!sofa_conv) throw Error(ErrorCode::MissingVariable, "global attribute SOFAConventions is absent");
  if (*sofa_conv != convention_hint) {
    throw Error(ErrorCode::UnsupportedConvention, "SOFAConventions is '" + *sofa_conv + "', expected " + convention_hint);
  }

  const auto ir = detail::read_dataset(file.get(), "Data.IR");
  if (ir.dims.size() != 3) throw Error(ErrorCode::UnsupportedConvention, "Data.IR must be M x R x N");
  const auto m = static_cast<std::size_t>(ir.dims[0]);
  const auto r = static_cast<std::size_t>(ir.dims[1]);
  const auto n = static_cast<std::size_t>(ir.dims[2]);
  if (r != 2) {
    throw Error(ErrorCode::UnsupportedConvention, "expected 2 receivers, found " + std::to_string(r));
  }

  const auto rate = detail::read_dataset(file.get(), "Data.SamplingRate");
  if (rate.values.empty()) throw Error(ErrorCode::MissingVariable, "Data.SamplingRate is empty");
  const double fs = rate.values.front();
  for (double v : rate.values) {
    if (v != fs) throw Error(ErrorCode::UnsupportedConvention, "per-measurement sample rates are not supported");
  }
  if (!(fs > 0.0) || fs != std::floor(fs) || fs > 4.0e9) {
    throw Error(ErrorCode::UnsupportedConvention, "sample rate must be a positive integer");
  }

  const auto pos = detail::read_dataset(file.get(), "SourcePosition");
  if (pos.dims.size() != 2 || pos.dims[1] != 3 || (pos.dims[0] != m && pos.dims[0] != 1)) {
    throw Error(ErrorCode::UnsupportedConvention, "SourcePosition must be M x 3 or 1 x 3");
  }
  std::string type = "spherical";
  {
    detail::Handle ds(H5Dopen2(file.get(), "SourcePosition", H5P_DEFAULT), H5Dclose);
    if (auto t = detail::read_string_attribute(ds.get(), "Type")) type = *t;
  }
  if (type != "spherical" && type != "cartesian") {
    throw Error(ErrorCode::UnsupportedConvention, "SourcePosition Type '" + type + "' is not supported");
  }

  HrirSet set;
  set.sample_rate_hz = static_cast<std::uint32_t>(fs);
  set.label = path.stem().string();
  set.subject_id = detail::read_string_attribute(file.get(), "ListenerShortName").value_or(set.label);
  for (std::size_t i = 0; i < m; ++i) {
    const double* p = pos.values.data() + 3 * (pos.dims[0] == 1 ? 0 : i);
    if (type == "spherical") {
      set.directions.emplace_back(p[0], p[1], p[2]);
    } else {
      const double dist = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
      if (!(dist > 0.0)) throw Error(ErrorCode::InvalidDirection, "cartesian source position at the origin");
      set.directions.emplace_back(rad_to_deg(std::atan2(p[1], p[0])),
                                  rad_to_deg(std::asin(std::clamp(p[2] / dist, -1.0, 1.0))), dist);
    }
    const double* base = ir.values.data() + i * r * n;
    set.impulses.push_back({std::vector<double>(base, base + n), std::vector<double>(base + n, base + 2 * n)});
  }
  set.validate();
  return set;
}

}  // namespace hrtfeval::sofa
