#pragma once

#include <string>
#include <vector>

#include "types.hpp"

namespace qct {

// Counters reported by the readers; out-of-range HU values are clamped,
// not rejected.
struct ReadStats {
    size_t clamped = 0;
};

// Header is a small JSON object next to a raw little-endian payload:
//   {"dims":[nx,ny,nz], "spacing_mm":[sx,sy,sz], "origin_mm":[ox,oy,oz],
//    "dtype":"i16-le", "data":"<relative raw path>"}
Volume read_volume(const std::string& header_path, ReadStats* stats = nullptr);
void write_volume(const Volume& v, const std::string& header_path);

// Same header/raw convention with dtype "u8-le" (0/1).
LungMask read_mask(const std::string& header_path);
void write_mask(const LungMask& m, const std::string& header_path);

// Raw u8 payload with arbitrary per-voxel codes (phantom class labels).
std::vector<uint8_t> read_labels(const std::string& header_path, Index3* dims_out = nullptr);
void write_labels(const std::vector<uint8_t>& labels, const Index3& dims,
                  const std::array<double, 3>& spacing_mm, const std::string& header_path);

// Cohort CSV with the exact column set
//   patient_id,age,gender,severity,expert_label,time_days,event,volume_path,mask_override_path
// gender F/M, severity mild/moderate/severe, expert_label UIP/nonUIP, event 0/1.
// Errors name the offending row (1-based data row number).
std::vector<CohortRecord> read_cohort(const std::string& csv_path);
void write_cohort(const std::vector<CohortRecord>& records, const std::string& csv_path);

// Splits one CSV line; no quoting, the formats here never need it.
std::vector<std::string> split_csv_line(const std::string& line);

// Writes via a temp file in the same directory, then renames.
void atomic_write_file(const std::string& path, const std::string& content);

}  // namespace qct
