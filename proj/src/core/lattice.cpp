#include "lattice.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "errors.hpp"
#include "volume_io.hpp"

namespace qct {

void LatticeConfig::validate() const {
    if (!(window_mm > 0.0)) throw ValidationError("lattice: window_mm must be > 0");
    if (lattice_step_mm < 0.0) throw ValidationError("lattice: lattice_step_mm must be >= 0");
    if (!(min_lung_fraction > 0.0) || min_lung_fraction > 1.0)
        throw ValidationError("lattice: min_lung_fraction must be in (0, 1]");
    if (workers < 0) throw ValidationError("lattice: workers must be >= 0");
}

std::vector<Index3> place_lattice(const LungMask& mask, const std::array<double, 3>& spacing_mm,
                                  double step_mm) {
    if (mask.set_count() == 0) throw ValidationError("place_lattice: empty mask");

    Index3 step;
    for (int a = 0; a < 3; ++a)
        step[a] = std::max(1, static_cast<int>(std::lround(step_mm / spacing_mm[a])));

    std::vector<Index3> points;
    for (int z = 0; z < mask.dims[2]; z += step[2])
        for (int y = 0; y < mask.dims[1]; y += step[1])
            for (int x = 0; x < mask.dims[0]; x += step[0])
                if (mask.get(x, y, z)) points.push_back({x, y, z});

    // loop order already emits (z, y, x) lexicographic order
    return points;
}

WindowSample extract_window(const Volume& v, const LungMask& mask, const Index3& center,
                            double window_mm) {
    if (!v.in_bounds(center[0], center[1], center[2]))
        throw ValidationError("extract_window: center outside volume");

    Index3 lo, hi;  // inclusive
    for (int a = 0; a < 3; ++a) {
        const int side = std::max(2, static_cast<int>(std::lround(window_mm / v.spacing_mm[a])));
        lo[a] = std::max(0, center[a] - (side - 1) / 2);
        hi[a] = std::min(v.dims[a] - 1, center[a] - (side - 1) / 2 + side - 1);
    }

    WindowSample w;
    for (int a = 0; a < 3; ++a) w.dims[a] = hi[a] - lo[a] + 1;
    const size_t n = w.size();
    w.hu.resize(n);
    w.valid.resize(n);

    size_t out = 0;
    for (int z = lo[2]; z <= hi[2]; ++z) {
        for (int y = lo[1]; y <= hi[1]; ++y) {
            const size_t row = v.flatten(lo[0], y, z);
            for (int x = 0; x < w.dims[0]; ++x, ++out) {
                w.hu[out] = v.voxels[row + x];
                const uint8_t ok = mask.bits[row + x] ? 1 : 0;
                w.valid[out] = ok;
                w.valid_count += ok;
            }
        }
    }
    return w;
}

FeatureMap compute_feature_map(const Volume& v, const LungMask& mask, const LatticeConfig& cfg) {
    cfg.validate();
    mask.validate_against(v);

    const auto centers = place_lattice(mask, v.spacing_mm, cfg.effective_step_mm());

    struct Slot {
        double occupancy = 0.0;
        bool keep = false;
        FeatureVector features{};
    };
    std::vector<Slot> slots(centers.size());

    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::atomic<size_t> next{0};

    const auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= centers.size()) return;
            try {
                const WindowSample w = extract_window(v, mask, centers[i], cfg.window_mm);
                const double occ =
                    static_cast<double>(w.valid_count) / static_cast<double>(w.size());
                slots[i].occupancy = occ;
                if (occ + 1e-12 >= cfg.min_lung_fraction) {
                    slots[i].features = compute_feature_vector(w, cfg.texture);
                    slots[i].keep = true;
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(centers.size());
                return;
            }
        }
    };

    int nworkers = cfg.workers;
    if (nworkers == 0) nworkers = static_cast<int>(std::thread::hardware_concurrency());
    nworkers = std::max(1, nworkers);

    if (nworkers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nworkers);
        for (int t = 0; t < nworkers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    // assemble in lattice order; scheduling never touches the output order
    FeatureMap map;
    map.window_mm = cfg.window_mm;
    map.min_lung_fraction = cfg.min_lung_fraction;
    for (size_t i = 0; i < centers.size(); ++i) {
        if (!slots[i].keep) continue;
        map.points.push_back({centers[i], slots[i].occupancy, slots[i].features});
    }
    if (map.points.empty())
        throw ComputeError("feature map: no lattice point met the occupancy threshold");
    return map;
}

namespace {

void append_double(std::ostringstream& out, double v) {
    // round-trippable doubles keep rereads and hashes exact
    char buf[32];
    snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
}

}  // namespace

void write_feature_map_csv(const FeatureMap& map, const std::string& path) {
    std::ostringstream out;
    out << "x,y,z,occupancy";
    for (const auto& name : feature_names()) out << "," << name;
    out << "\n";
    for (const auto& p : map.points) {
        out << p.voxel[0] << "," << p.voxel[1] << "," << p.voxel[2] << ",";
        append_double(out, p.occupancy);
        for (double f : p.features) {
            out << ",";
            append_double(out, f);
        }
        out << "\n";
    }
    atomic_write_file(path, out.str());
}

FeatureMap read_feature_map_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open feature map CSV: " + path);

    std::string line;
    if (!std::getline(in, line)) throw ValidationError("feature map CSV is empty: " + path);
    const auto header = split_csv_line(line);
    if (header.size() != 4 + kFeatureCount || header[0] != "x" || header[3] != "occupancy")
        throw ValidationError("feature map CSV header mismatch: " + path);
    for (int i = 0; i < kFeatureCount; ++i)
        if (header[4 + i] != feature_names()[i])
            throw ValidationError("feature map CSV column " + header[4 + i] +
                                  " out of canonical order in " + path);

    FeatureMap map;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 4 + kFeatureCount)
            throw ValidationError("feature map CSV row width mismatch in " + path);
        LatticePoint p;
        p.voxel = {std::stoi(cells[0]), std::stoi(cells[1]), std::stoi(cells[2])};
        p.occupancy = std::stod(cells[3]);
        for (int i = 0; i < kFeatureCount; ++i) p.features[i] = std::stod(cells[4 + i]);
        map.points.push_back(p);
    }
    return map;
}

std::string format_mm(double mm) {
    std::ostringstream s;
    s << mm;
    return s.str();
}

}  // namespace qct
