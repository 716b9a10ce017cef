#include "volume_io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace qct {

namespace {

json read_header_json(const std::string& header_path) {
    std::ifstream in(header_path);
    if (!in) throw IoError("cannot open header: " + header_path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("malformed header JSON in " + header_path + ": " + e.what());
    }
    return j;
}

struct HeaderFields {
    Index3 dims;
    std::array<double, 3> spacing;
    std::array<double, 3> origin;
    std::string dtype;
    fs::path raw_path;
};

HeaderFields parse_header(const json& j, const std::string& header_path) {
    HeaderFields h;
    try {
        for (int a = 0; a < 3; ++a) {
            h.dims[a] = j.at("dims").at(a).get<int>();
            h.spacing[a] = j.at("spacing_mm").at(a).get<double>();
            h.origin[a] = j.at("origin_mm").at(a).get<double>();
        }
        h.dtype = j.at("dtype").get<std::string>();
        h.raw_path = fs::path(header_path).parent_path() / j.at("data").get<std::string>();
    } catch (const json::exception& e) {
        throw ValidationError("header " + header_path + " missing required key: " + e.what());
    }
    if (h.dims[0] < 1 || h.dims[1] < 1 || h.dims[2] < 1)
        throw ValidationError("header " + header_path + ": dims must all be >= 1");
    for (double s : h.spacing)
        if (!(s > 0.0))
            throw ValidationError("header " + header_path + ": spacing components must be > 0");
    return h;
}

std::vector<char> read_raw_exact(const fs::path& path, size_t expected_bytes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open raw file: " + path.string());
    in.seekg(0, std::ios::end);
    const auto actual = static_cast<size_t>(in.tellg());
    if (actual != expected_bytes) {
        std::ostringstream msg;
        msg << "raw file " << path.string() << " has " << actual << " bytes, expected "
            << expected_bytes;
        throw ValidationError(msg.str());
    }
    in.seekg(0, std::ios::beg);
    std::vector<char> buf(expected_bytes);
    in.read(buf.data(), static_cast<std::streamsize>(expected_bytes));
    if (!in) throw IoError("short read on raw file: " + path.string());
    return buf;
}

void write_raw(const fs::path& path, const char* data, size_t bytes) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for write: " + tmp.string());
        out.write(data, static_cast<std::streamsize>(bytes));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_header(const fs::path& header_path, const Index3& dims,
                  const std::array<double, 3>& spacing, const std::array<double, 3>& origin,
                  const std::string& dtype, const std::string& raw_name) {
    json j;
    j["dims"] = dims;
    j["spacing_mm"] = spacing;
    j["origin_mm"] = origin;
    j["dtype"] = dtype;
    j["data"] = raw_name;
    atomic_write_file(header_path.string(), j.dump(2) + "\n");
}

std::string raw_name_for(const fs::path& header_path) {
    fs::path p = header_path.filename();
    p.replace_extension(".raw");
    return p.string();
}

}  // namespace

void atomic_write_file(const std::string& path, const std::string& content) {
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for write: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    fs::rename(tmp, target);
}

Volume read_volume(const std::string& header_path, ReadStats* stats) {
    const HeaderFields h = parse_header(read_header_json(header_path), header_path);
    if (h.dtype != "i16-le")
        throw ValidationError("header " + header_path + ": unsupported dtype '" + h.dtype +
                              "', expected i16-le");

    Volume v;
    v.dims = h.dims;
    v.spacing_mm = h.spacing;
    v.origin_mm = h.origin;
    const size_t n = v.voxel_count();
    const std::vector<char> raw = read_raw_exact(h.raw_path, 2 * n);

    v.voxels.resize(n);
    size_t clamped = 0;
    for (size_t i = 0; i < n; ++i) {
        const auto lo = static_cast<uint8_t>(raw[2 * i]);
        const auto hi = static_cast<uint8_t>(raw[2 * i + 1]);
        auto value = static_cast<int16_t>(static_cast<uint16_t>(lo) |
                                          (static_cast<uint16_t>(hi) << 8));
        if (value < kHuMin) {
            value = kHuMin;
            ++clamped;
        } else if (value > kHuMax) {
            value = kHuMax;
            ++clamped;
        }
        v.voxels[i] = value;
    }
    if (stats) stats->clamped = clamped;
    v.validate();
    return v;
}

void write_volume(const Volume& v, const std::string& header_path) {
    v.validate();
    const fs::path header(header_path);
    const std::string raw_name = raw_name_for(header);

    const size_t n = v.voxel_count();
    std::vector<char> raw(2 * n);
    for (size_t i = 0; i < n; ++i) {
        const auto u = static_cast<uint16_t>(v.voxels[i]);
        raw[2 * i] = static_cast<char>(u & 0xff);
        raw[2 * i + 1] = static_cast<char>(u >> 8);
    }
    write_raw(header.parent_path() / raw_name, raw.data(), raw.size());
    write_header(header, v.dims, v.spacing_mm, v.origin_mm, "i16-le", raw_name);
}

namespace {

std::pair<Index3, std::vector<uint8_t>> read_u8_payload(const std::string& header_path,
                                                        std::array<double, 3>* spacing_out) {
    const HeaderFields h = parse_header(read_header_json(header_path), header_path);
    if (h.dtype != "u8-le")
        throw ValidationError("header " + header_path + ": unsupported dtype '" + h.dtype +
                              "', expected u8-le");
    const size_t n = static_cast<size_t>(h.dims[0]) * h.dims[1] * h.dims[2];
    const std::vector<char> raw = read_raw_exact(h.raw_path, n);
    std::vector<uint8_t> bytes(raw.begin(), raw.end());
    if (spacing_out) *spacing_out = h.spacing;
    return {h.dims, std::move(bytes)};
}

}  // namespace

LungMask read_mask(const std::string& header_path) {
    auto [dims, bytes] = read_u8_payload(header_path, nullptr);
    LungMask m;
    m.dims = dims;
    m.bits.resize(bytes.size());
    for (size_t i = 0; i < bytes.size(); ++i) m.bits[i] = bytes[i] ? 1 : 0;
    return m;
}

void write_mask(const LungMask& m, const std::string& header_path) {
    if (m.bits.size() != m.voxel_count())
        throw ValidationError("mask bit count does not match dims");
    const fs::path header(header_path);
    const std::string raw_name = raw_name_for(header);
    write_raw(header.parent_path() / raw_name,
              reinterpret_cast<const char*>(m.bits.data()), m.bits.size());
    write_header(header, m.dims, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}, "u8-le", raw_name);
}

std::vector<uint8_t> read_labels(const std::string& header_path, Index3* dims_out) {
    auto [dims, bytes] = read_u8_payload(header_path, nullptr);
    if (dims_out) *dims_out = dims;
    return bytes;
}

void write_labels(const std::vector<uint8_t>& labels, const Index3& dims,
                  const std::array<double, 3>& spacing_mm, const std::string& header_path) {
    const size_t n = static_cast<size_t>(dims[0]) * dims[1] * dims[2];
    if (labels.size() != n) throw ValidationError("label count does not match dims");
    const fs::path header(header_path);
    const std::string raw_name = raw_name_for(header);
    write_raw(header.parent_path() / raw_name,
              reinterpret_cast<const char*>(labels.data()), labels.size());
    write_header(header, dims, spacing_mm, {0.0, 0.0, 0.0}, "u8-le", raw_name);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    out.push_back(cell);
    return out;
}

namespace {

const std::vector<std::string> kCohortColumns = {
    "patient_id", "age",       "gender", "severity",   "expert_label",
    "time_days",  "event",     "volume_path", "mask_override_path"};

[[noreturn]] void row_error(size_t row, const std::string& what) {
    throw ValidationError("cohort row " + std::to_string(row) + ": " + what);
}

double parse_double(const std::string& s, size_t row, const std::string& field) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        row_error(row, "cannot parse " + field + " value '" + s + "'");
    }
}

}  // namespace

std::vector<CohortRecord> read_cohort(const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw IoError("cannot open cohort CSV: " + csv_path);

    std::string line;
    if (!std::getline(in, line)) throw ValidationError("cohort CSV is empty: " + csv_path);
    const auto header = split_csv_line(line);
    if (header != kCohortColumns) {
        std::string expect;
        for (const auto& c : kCohortColumns) expect += (expect.empty() ? "" : ",") + c;
        throw ValidationError("cohort CSV header mismatch in " + csv_path + "; expected: " + expect);
    }

    std::vector<CohortRecord> records;
    std::set<std::string> seen_ids;
    size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++row;
        const auto cells = split_csv_line(line);
        if (cells.size() != kCohortColumns.size())
            row_error(row, "expected " + std::to_string(kCohortColumns.size()) + " cells, got " +
                               std::to_string(cells.size()));

        CohortRecord r;
        r.patient_id = cells[0];
        if (r.patient_id.empty()) row_error(row, "empty patient_id");
        if (!seen_ids.insert(r.patient_id).second)
            row_error(row, "duplicate patient_id '" + r.patient_id + "'");

        r.age = parse_double(cells[1], row, "age");

        if (cells[2] == "F")
            r.gender = Gender::Female;
        else if (cells[2] == "M")
            r.gender = Gender::Male;
        else
            row_error(row, "unknown gender token '" + cells[2] + "' (expected F or M)");

        if (cells[3] == "mild")
            r.severity = 1;
        else if (cells[3] == "moderate")
            r.severity = 2;
        else if (cells[3] == "severe")
            r.severity = 3;
        else
            row_error(row, "unknown severity token '" + cells[3] + "'");

        if (cells[4] == "UIP")
            r.uip = true;
        else if (cells[4] == "nonUIP")
            r.uip = false;
        else
            row_error(row, "unknown expert_label token '" + cells[4] + "'");

        r.time_days = parse_double(cells[5], row, "time_days");
        if (r.time_days < 0.0) row_error(row, "negative time_days");

        if (cells[6] == "0")
            r.event = false;
        else if (cells[6] == "1")
            r.event = true;
        else
            row_error(row, "unknown event token '" + cells[6] + "' (expected 0 or 1)");

        r.volume_path = cells[7];
        r.mask_override_path = cells[8];
        records.push_back(std::move(r));
    }
    return records;
}

void write_cohort(const std::vector<CohortRecord>& records, const std::string& csv_path) {
    std::ostringstream out;
    for (size_t i = 0; i < kCohortColumns.size(); ++i)
        out << (i ? "," : "") << kCohortColumns[i];
    out << "\n";
    for (const auto& r : records) {
        out << r.patient_id << "," << r.age << "," << (r.gender == Gender::Male ? "M" : "F") << ","
            << (r.severity == 1 ? "mild" : r.severity == 2 ? "moderate" : "severe") << ","
            << (r.uip ? "UIP" : "nonUIP") << "," << r.time_days << "," << (r.event ? 1 : 0) << ","
            << r.volume_path << "," << r.mask_override_path << "\n";
    }
    atomic_write_file(csv_path, out.str());
}

}  // namespace qct
