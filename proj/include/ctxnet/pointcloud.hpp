#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ctxnet/error.hpp"
#include "ctxnet/rng.hpp"

namespace ctxnet {

/// N points x F features, row-major, columns 0..2 are x, y, z.
/// Per-point labels are optional; when present `class_count` bounds them.
struct PointCloud {
    std::size_t n = 0;
    std::size_t f = 0;
    std::vector<double> data;
    std::vector<std::uint32_t> labels;
    std::uint32_t class_count = 0;

    PointCloud() = default;
    PointCloud(std::size_t rows, std::size_t cols) : n(rows), f(cols), data(rows * cols, 0.0) {}

    bool has_labels() const { return !labels.empty(); }

    double& at(std::size_t i, std::size_t j) { return data[i * f + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * f + j]; }

    std::array<double, 3> xyz(std::size_t i) const {
        return {data[i * f], data[i * f + 1], data[i * f + 2]};
    }

    void validate() const {
        require(n >= 1, "dimension", "point cloud is empty");
        require(f >= 3, "dimension", "point cloud needs at least 3 columns, got " + std::to_string(f));
        require(data.size() == n * f, "dimension", "data length does not match n*f");
        for (double v : data) require(std::isfinite(v), "dimension", "non-finite coordinate");
        if (has_labels()) {
            require(labels.size() == n, "dimension", "label count does not match point count");
            for (auto l : labels)
                require(l < class_count, "data",
                        "label " + std::to_string(l) + " >= class_count " + std::to_string(class_count));
        }
    }

    PointCloud select(const std::vector<std::size_t>& rows) const {
        PointCloud out(rows.size(), f);
        out.class_count = class_count;
        for (std::size_t r = 0; r < rows.size(); ++r)
            std::copy_n(data.begin() + rows[r] * f, f, out.data.begin() + r * f);
        if (has_labels()) {
            out.labels.resize(rows.size());
            for (std::size_t r = 0; r < rows.size(); ++r) out.labels[r] = labels[rows[r]];
        }
        return out;
    }
};

enum class PointFormat { XyzText, BinaryV1 };

inline PointFormat parse_point_format(std::string_view name) {
    if (name == "xyz-text" || name == "xyz" || name == "txt") return PointFormat::XyzText;
    if (name == "binary-v1" || name == "bin") return PointFormat::BinaryV1;
    fail("usage", "unknown point format '" + std::string(name) + "'");
}

/// Picks the format from the extension: ".bin" / ".3dcn" are binary-v1.
inline PointFormat format_for_path(const std::string& path) {
    auto ends_with = [&](std::string_view s) {
        return path.size() >= s.size() && path.compare(path.size() - s.size(), s.size(), s) == 0;
    };
    return (ends_with(".bin") || ends_with(".3dcn")) ? PointFormat::BinaryV1 : PointFormat::XyzText;
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

inline double parse_double(std::string_view tok, std::size_t line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
        fail("parse", "line " + std::to_string(line_no) + ": bad number '" + std::string(tok) + "'");
    return v;
}

inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

template <typename U>
void put_le(std::ostream& os, U v) {
    static_assert(std::is_integral_v<U> || std::is_floating_point_v<U>);
    std::array<unsigned char, sizeof(U)> bytes;
    std::memcpy(bytes.data(), &v, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(U));
}

template <typename U>
U get_le(std::istream& is, const char* what) {
    std::array<unsigned char, sizeof(U)> bytes;
    is.read(reinterpret_cast<char*>(bytes.data()), sizeof(U));
    if (!is) fail("format", std::string("truncated file while reading ") + what);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    U v;
    std::memcpy(&v, bytes.data(), sizeof(U));
    return v;
}

inline std::vector<std::string> default_column_names(std::size_t f) {
    std::vector<std::string> names{"x", "y", "z"};
    if (f == 6 || f == 9) {
        names.insert(names.end(), {"r", "g", "b"});
        if (f == 9) names.insert(names.end(), {"xn", "yn", "zn"});
    } else if (f == 7) {
        names.insert(names.end(), {"r", "g", "b", "i"});
    } else {
        for (std::size_t j = 3; j < f; ++j) names.push_back("c" + std::to_string(j));
    }
    return names;
}

}  // namespace detail

inline PointCloud read_xyz_text(std::istream& in) {
    PointCloud pc;
    std::vector<std::string> columns;
    std::optional<std::size_t> label_col;
    std::vector<std::size_t> order;  // file column feeding each feature column
    std::size_t width = 0;
    std::uint32_t max_label = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string_view sv(line);
        auto toks = detail::split_ws(sv);
        if (toks.empty()) continue;
        if (toks[0].front() == '#') {
            if (toks[0] == "#cols" && width == 0 && columns.empty()) {
                for (std::size_t k = 1; k < toks.size(); ++k) columns.emplace_back(toks[k]);
                require(!columns.empty(), "parse", "line " + std::to_string(line_no) + ": empty #cols header");
            }
            continue;
        }
        if (width == 0) {
            width = toks.size();
            if (!columns.empty()) {
                require(columns.size() == width, "parse",
                        "line " + std::to_string(line_no) + ": header declares " + std::to_string(columns.size()) +
                            " columns, row has " + std::to_string(width));
                std::array<std::optional<std::size_t>, 3> axes;
                for (std::size_t c = 0; c < columns.size(); ++c) {
                    if (columns[c] == "label") label_col = c;
                    else if (columns[c] == "x") axes[0] = c;
                    else if (columns[c] == "y") axes[1] = c;
                    else if (columns[c] == "z") axes[2] = c;
                }
                for (std::size_t a = 0; a < 3; ++a) {
                    if (axes[a]) order.push_back(*axes[a]);
                }
                if (order.size() != 3) order.clear();
                for (std::size_t c = 0; c < width; ++c) {
                    if (label_col && c == *label_col) continue;
                    if (std::find(order.begin(), order.end(), c) == order.end()) order.push_back(c);
                }
            } else {
                for (std::size_t c = 0; c < width; ++c) order.push_back(c);
            }
            pc.f = order.size();
            require(pc.f >= 3, "dimension",
                    "need at least 3 feature columns, got " + std::to_string(pc.f));
        }
        require(toks.size() == width, "parse",
                "line " + std::to_string(line_no) + ": expected " + std::to_string(width) + " columns, got " +
                    std::to_string(toks.size()));
        for (std::size_t c : order) pc.data.push_back(detail::parse_double(toks[c], line_no));
        if (label_col) {
            const double v = detail::parse_double(toks[*label_col], line_no);
            require(v >= 0 && v == std::floor(v) && v < 4294967296.0, "parse",
                    "line " + std::to_string(line_no) + ": label must be a non-negative integer");
            const auto l = static_cast<std::uint32_t>(v);
            max_label = std::max(max_label, l);
            pc.labels.push_back(l);
        }
        ++pc.n;
    }
    require(pc.n >= 1, "parse", "no points found");
    if (label_col) pc.class_count = max_label + 1;
    return pc;
}

inline void write_xyz_text(std::ostream& out, const PointCloud& pc) {
    auto names = detail::default_column_names(pc.f);
    out << "#cols";
    for (const auto& nm : names) out << ' ' << nm;
    if (pc.has_labels()) out << " label";
    out << '\n';
    for (std::size_t i = 0; i < pc.n; ++i) {
        for (std::size_t j = 0; j < pc.f; ++j) {
            if (j) out << ' ';
            out << detail::format_double(pc.at(i, j));
        }
        if (pc.has_labels()) out << ' ' << pc.labels[i];
        out << '\n';
    }
}

inline constexpr std::array<char, 4> kPointMagic{'3', 'D', 'C', 'N'};

inline PointCloud read_binary_v1(std::istream& in) {
    std::array<char, 4> magic{};
    in.read(magic.data(), 4);
    require(in && magic == kPointMagic, "format", "bad magic, not a binary-v1 point file");
    const auto version = detail::get_le<std::uint8_t>(in, "version");
    require(version == 1, "format", "unsupported binary point version " + std::to_string(version));
    PointCloud pc;
    pc.n = detail::get_le<std::uint32_t>(in, "n");
    pc.f = detail::get_le<std::uint32_t>(in, "f");
    const auto has_labels = detail::get_le<std::uint8_t>(in, "has_labels");
    require(pc.f >= 3, "dimension", "need at least 3 feature columns, got " + std::to_string(pc.f));
    require(pc.n >= 1, "format", "empty point file");
    pc.data.resize(pc.n * pc.f);
    for (auto& v : pc.data) v = detail::get_le<float>(in, "point data");
    if (has_labels) {
        pc.labels.resize(pc.n);
        std::uint32_t max_label = 0;
        for (auto& l : pc.labels) {
            l = detail::get_le<std::uint32_t>(in, "labels");
            max_label = std::max(max_label, l);
        }
        pc.class_count = max_label + 1;
    }
    return pc;
}

inline void write_binary_v1(std::ostream& out, const PointCloud& pc) {
    out.write(kPointMagic.data(), 4);
    detail::put_le<std::uint8_t>(out, 1);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(pc.n));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(pc.f));
    detail::put_le<std::uint8_t>(out, pc.has_labels() ? 1 : 0);
    for (double v : pc.data) detail::put_le<float>(out, static_cast<float>(v));
    for (auto l : pc.labels) detail::put_le<std::uint32_t>(out, l);
}

inline PointCloud load_points(const std::string& path, PointFormat format) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "io", "cannot open " + path);
    return format == PointFormat::XyzText ? read_xyz_text(in) : read_binary_v1(in);
}

inline PointCloud load_points(const std::string& path) { return load_points(path, format_for_path(path)); }

inline void save_points(const PointCloud& pc, const std::string& path, PointFormat format) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), "io", "cannot write " + path);
    if (format == PointFormat::XyzText) write_xyz_text(out, pc);
    else write_binary_v1(out, pc);
    require(static_cast<bool>(out), "io", "write failed for " + path);
}

inline void save_points(const PointCloud& pc, const std::string& path) {
    save_points(pc, path, format_for_path(path));
}

/// Zero centroid, farthest point at distance 1. A cloud whose points all
/// coincide collapses to the origin.
inline PointCloud normalize_unit_sphere(const PointCloud& pc) {
    PointCloud out = pc;
    std::array<double, 3> c{0, 0, 0};
    for (std::size_t i = 0; i < pc.n; ++i)
        for (int a = 0; a < 3; ++a) c[a] += pc.at(i, a);
    for (auto& v : c) v /= static_cast<double>(pc.n);
    double max_norm = 0.0;
    for (std::size_t i = 0; i < pc.n; ++i) {
        double s = 0;
        for (int a = 0; a < 3; ++a) {
            out.at(i, a) = pc.at(i, a) - c[a];
            s += out.at(i, a) * out.at(i, a);
        }
        max_norm = std::max(max_norm, std::sqrt(s));
    }
    for (std::size_t i = 0; i < pc.n; ++i)
        for (int a = 0; a < 3; ++a) out.at(i, a) = max_norm > 0 ? out.at(i, a) / max_norm : 0.0;
    return out;
}

/// Exactly `target_n` rows. Subsampling draws without replacement; when
/// oversampling every original row is kept once and the remainder are
/// uniform draws with replacement. Output order is shuffled.
inline PointCloud resample(const PointCloud& pc, std::size_t target_n, std::uint64_t seed) {
    require(target_n >= 1, "argument", "resample target must be >= 1");
    require(pc.n >= 1, "argument", "cannot resample an empty cloud");
    Rng rng(seed);
    std::vector<std::size_t> idx(pc.n);
    for (std::size_t i = 0; i < pc.n; ++i) idx[i] = i;
    if (pc.n >= target_n) {
        for (std::size_t i = 0; i < target_n; ++i) std::swap(idx[i], idx[i + rng.below(pc.n - i)]);
        idx.resize(target_n);
    } else {
        while (idx.size() < target_n) idx.push_back(rng.below(pc.n));
        for (std::size_t i = idx.size() - 1; i > 0; --i) std::swap(idx[i], idx[rng.below(i + 1)]);
    }
    return pc.select(idx);
}

inline PointCloud rotate_z(const PointCloud& pc, double angle) {
    PointCloud out = pc;
    const double c = std::cos(angle), s = std::sin(angle);
    for (std::size_t i = 0; i < pc.n; ++i) {
        const double x = pc.at(i, 0), y = pc.at(i, 1);
        out.at(i, 0) = c * x - s * y;
        out.at(i, 1) = s * x + c * y;
    }
    return out;
}

/// Adds N(0, sigma^2) noise clamped to [-clip, clip] to each coordinate.
inline PointCloud jitter(const PointCloud& pc, double sigma, double clip, Rng& rng) {
    PointCloud out = pc;
    if (sigma <= 0.0) return out;
    for (std::size_t i = 0; i < pc.n; ++i)
        for (int a = 0; a < 3; ++a) out.at(i, a) += std::clamp(sigma * rng.normal(), -clip, clip);
    return out;
}

struct AugmentOptions {
    bool rotate_z = true;
    double jitter_sigma = 0.01;
    double jitter_clip = 0.05;
};

inline PointCloud augment(const PointCloud& pc, const AugmentOptions& opt, std::uint64_t seed) {
    Rng rng(seed);
    PointCloud out = opt.rotate_z ? rotate_z(pc, rng.uniform(0.0, 2.0 * std::numbers::pi)) : pc;
    return jitter(out, opt.jitter_sigma, opt.jitter_clip, rng);
}

// ---------------------------------------------------------------------------
// Room blocks

struct BlockGrid {
    double min_x = 0, min_y = 0;
    std::size_t cells_x = 1, cells_y = 1;
    std::vector<std::size_t> cell_of_point;  // cy * cells_x + cx
};

/// Assigns each point to a block_xy x block_xy cell anchored at the cloud's
/// xy minimum. Points on the far boundary fall into the last cell.
inline BlockGrid assign_cells(const PointCloud& pc, double block_xy) {
    require(block_xy > 0, "argument", "block size must be positive");
    BlockGrid g;
    double max_x = -std::numeric_limits<double>::infinity(), max_y = max_x;
    g.min_x = g.min_y = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pc.n; ++i) {
        g.min_x = std::min(g.min_x, pc.at(i, 0));
        g.min_y = std::min(g.min_y, pc.at(i, 1));
        max_x = std::max(max_x, pc.at(i, 0));
        max_y = std::max(max_y, pc.at(i, 1));
    }
    auto count = [&](double extent) {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(extent / block_xy)));
    };
    g.cells_x = count(max_x - g.min_x);
    g.cells_y = count(max_y - g.min_y);
    g.cell_of_point.resize(pc.n);
    for (std::size_t i = 0; i < pc.n; ++i) {
        auto cx = std::min(g.cells_x - 1, static_cast<std::size_t>((pc.at(i, 0) - g.min_x) / block_xy));
        auto cy = std::min(g.cells_y - 1, static_cast<std::size_t>((pc.at(i, 1) - g.min_y) / block_xy));
        g.cell_of_point[i] = cy * g.cells_x + cx;
    }
    return g;
}

/// Raw point indices per kept block, in cell order. Cells with fewer than
/// `min_points` members are dropped.
inline std::vector<std::vector<std::size_t>> block_members(const PointCloud& pc, double block_xy,
                                                           std::size_t min_points = 16) {
    const auto g = assign_cells(pc, block_xy);
    std::vector<std::vector<std::size_t>> cells(g.cells_x * g.cells_y);
    for (std::size_t i = 0; i < pc.n; ++i) cells[g.cell_of_point[i]].push_back(i);
    std::vector<std::vector<std::size_t>> kept;
    for (auto& c : cells)
        if (!c.empty() && c.size() >= min_points) kept.push_back(std::move(c));
    return kept;
}

/// Splits a room into xy blocks; each block becomes a 9-column cloud
/// (xyz relative to the block minimum, rgb in [0,1], xyz normalized by the
/// room bounding box) resampled to `points_per_block`.
inline std::vector<PointCloud> split_blocks(const PointCloud& pc, double block_xy, std::size_t points_per_block,
                                            std::uint64_t seed, std::size_t min_points = 16) {
    require(pc.f >= 3, "dimension", "need xyz columns");
    require(pc.f != 4 && pc.f != 5, "ambiguous-columns",
            "cannot interpret " + std::to_string(pc.f) + " columns as xyz[rgb]");
    const bool has_rgb = pc.f >= 6;
    std::array<double, 3> lo, hi;
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < pc.n; ++i)
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], pc.at(i, a));
            hi[a] = std::max(hi[a], pc.at(i, a));
        }

    std::vector<PointCloud> blocks;
    const auto members = block_members(pc, block_xy, min_points);
    for (std::size_t b = 0; b < members.size(); ++b) {
        const auto& m = members[b];
        std::array<double, 3> bmin;
        bmin.fill(std::numeric_limits<double>::infinity());
        for (auto i : m)
            for (int a = 0; a < 3; ++a) bmin[a] = std::min(bmin[a], pc.at(i, a));
        PointCloud raw(m.size(), 9);
        raw.class_count = pc.class_count;
        if (pc.has_labels()) raw.labels.resize(m.size());
        for (std::size_t r = 0; r < m.size(); ++r) {
            const auto i = m[r];
            for (int a = 0; a < 3; ++a) {
                raw.at(r, a) = pc.at(i, a) - bmin[a];
                raw.at(r, 3 + a) = has_rgb ? pc.at(i, 3 + a) / 255.0 : 0.0;
                const double ext = hi[a] - lo[a];
                raw.at(r, 6 + a) = ext > 0 ? std::clamp((pc.at(i, a) - lo[a]) / ext, 0.0, 1.0) : 0.0;
            }
            if (pc.has_labels()) raw.labels[r] = pc.labels[i];
        }
        blocks.push_back(resample(raw, points_per_block, mix_seed(seed, b)));
    }
    return blocks;
}

// ---------------------------------------------------------------------------
// Synthetic shapes

enum class SyntheticKind { Classify4, Segment2 };

inline SyntheticKind parse_synthetic_kind(std::string_view s) {
    if (s == "classify4") return SyntheticKind::Classify4;
    if (s == "segment2") return SyntheticKind::Segment2;
    fail("usage", "unknown synthetic kind '" + std::string(s) + "'");
}

enum class SurfaceShape { Sphere = 0, Cube = 1, Cylinder = 2, Cross = 3 };

/// Unit-size surface sample centered at the origin: sphere of radius 1,
/// cube [-1,1]^3, cylinder of radius 1 and height 2, or the two planes x=0
/// and y=0 clipped to [-1,1]^3.
inline std::array<double, 3> sample_shape_point(SurfaceShape shape, Rng& rng) {
    using std::numbers::pi;
    switch (shape) {
        case SurfaceShape::Sphere: {
            const double z = rng.uniform(-1.0, 1.0);
            const double t = rng.uniform(0.0, 2.0 * pi);
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            return {r * std::cos(t), r * std::sin(t), z};
        }
        case SurfaceShape::Cube: {
            const auto face = rng.below(6);
            const double u = rng.uniform(-1.0, 1.0), v = rng.uniform(-1.0, 1.0);
            const double s = (face & 1) ? 1.0 : -1.0;
            switch (face / 2) {
                case 0: return {s, u, v};
                case 1: return {u, s, v};
                default: return {u, v, s};
            }
        }
        case SurfaceShape::Cylinder: {
            // lateral area 4*pi, each cap pi
            const double pick = rng.uniform(0.0, 6.0);
            const double t = rng.uniform(0.0, 2.0 * pi);
            if (pick < 4.0) return {std::cos(t), std::sin(t), rng.uniform(-1.0, 1.0)};
            const double r = std::sqrt(rng.uniform());
            return {r * std::cos(t), r * std::sin(t), pick < 5.0 ? -1.0 : 1.0};
        }
        case SurfaceShape::Cross: {
            const double u = rng.uniform(-1.0, 1.0), v = rng.uniform(-1.0, 1.0);
            return rng.below(2) ? std::array<double, 3>{0.0, u, v} : std::array<double, 3>{u, 0.0, v};
        }
    }
    return {0, 0, 0};
}

// Geometry of the segment2 composite: a square plate at z = kPlateZ spanning
// [-1,1]^2 with a dome of radius kDomeRadius resting on it.
inline constexpr double kPlateZ = -0.25;
inline constexpr double kDomeRadius = 0.6;

inline PointCloud make_shape_cloud(SurfaceShape shape, std::size_t n, Rng& rng) {
    PointCloud pc(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = sample_shape_point(shape, rng);
        for (int a = 0; a < 3; ++a) pc.at(i, a) = p[a];
    }
    return pc;
}

/// Plate points get label 0, dome points label 1. The dome center is offset
/// within the plate by up to 0.3 in x and y.
inline PointCloud make_plate_dome(std::size_t n, Rng& rng) {
    using std::numbers::pi;
    PointCloud pc(n, 3);
    pc.labels.resize(n);
    pc.class_count = 2;
    const double cx = rng.uniform(-0.3, 0.3), cy = rng.uniform(-0.3, 0.3);
    const std::size_t dome = n / 2;
    for (std::size_t i = 0; i < n; ++i) {
        if (i < dome) {
            const double z = rng.uniform(0.0, 1.0);
            const double t = rng.uniform(0.0, 2.0 * pi);
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            pc.at(i, 0) = cx + kDomeRadius * r * std::cos(t);
            pc.at(i, 1) = cy + kDomeRadius * r * std::sin(t);
            pc.at(i, 2) = kPlateZ + kDomeRadius * z;
            pc.labels[i] = 1;
        } else {
            pc.at(i, 0) = rng.uniform(-1.0, 1.0);
            pc.at(i, 1) = rng.uniform(-1.0, 1.0);
            pc.at(i, 2) = kPlateZ;
            pc.labels[i] = 0;
        }
    }
    return pc;
}

inline PointCloud scale_coords(const PointCloud& pc, double s) {
    PointCloud out = pc;
    for (std::size_t i = 0; i < pc.n; ++i)
        for (int a = 0; a < 3; ++a) out.at(i, a) *= s;
    return out;
}

/// A labeled training sample. `label` is the cloud's class for
/// classification and -1 for segmentation (labels live in the cloud).
struct Sample {
    PointCloud cloud;
    int label = -1;
};

/// Deterministic synthetic dataset. classify4 cycles the four shapes
/// round-robin; segment2 emits plate+dome composites. Every sample is
/// independently rotated about z and scaled by a factor in [0.8, 1.2].
inline std::vector<Sample> make_synthetic(SyntheticKind kind, std::size_t n_points, std::size_t n_samples,
                                          std::uint64_t seed) {
    require(n_points >= 1 && std::has_single_bit(n_points), "argument", "n_points must be a power of two");
    std::vector<Sample> out;
    out.reserve(n_samples);
    for (std::size_t s = 0; s < n_samples; ++s) {
        Rng rng(mix_seed(seed, s));
        Sample smp;
        if (kind == SyntheticKind::Classify4) {
            smp.label = static_cast<int>(s % 4);
            smp.cloud = make_shape_cloud(static_cast<SurfaceShape>(smp.label), n_points, rng);
        } else {
            smp.cloud = make_plate_dome(n_points, rng);
        }
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double scale = rng.uniform(0.8, 1.2);
        smp.cloud = scale_coords(rotate_z(smp.cloud, angle), scale);
        out.push_back(std::move(smp));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Triangle soup -> points

struct TriangleMesh {
    std::vector<std::array<double, 3>> vertices;
    std::vector<std::array<std::size_t, 3>> faces;
};

/// Text mesh: vertex lines "x y z", face lines "f i j k" with 0-based
/// vertex indices, '#' comments.
inline TriangleMesh read_mesh_text(std::istream& in) {
    TriangleMesh mesh;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto toks = detail::split_ws(line);
        if (toks.empty() || toks[0].front() == '#') continue;
        if (toks[0] == "f") {
            require(toks.size() == 4, "parse", "line " + std::to_string(line_no) + ": face needs 3 indices");
            std::array<std::size_t, 3> face{};
            for (int k = 0; k < 3; ++k) {
                auto tok = toks[k + 1];
                auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), face[k]);
                require(ec == std::errc() && ptr == tok.data() + tok.size(), "parse",
                        "line " + std::to_string(line_no) + ": bad face index");
            }
            mesh.faces.push_back(face);
        } else {
            auto off = toks[0] == "v" ? 1u : 0u;
            require(toks.size() == 3 + off, "parse", "line " + std::to_string(line_no) + ": vertex needs 3 values");
            mesh.vertices.push_back({detail::parse_double(toks[off], line_no),
                                     detail::parse_double(toks[off + 1], line_no),
                                     detail::parse_double(toks[off + 2], line_no)});
        }
    }
    for (const auto& f : mesh.faces)
        for (auto v : f) require(v < mesh.vertices.size(), "parse", "face index out of range");
    require(!mesh.faces.empty(), "parse", "mesh has no faces");
    return mesh;
}

inline TriangleMesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "io", "cannot open " + path);
    return read_mesh_text(in);
}

/// Area-weighted face choice, then uniform barycentric sampling.
inline PointCloud sample_mesh(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
    std::vector<double> cumulative;
    cumulative.reserve(mesh.faces.size());
    double total = 0.0;
    for (const auto& f : mesh.faces) {
        const auto& a = mesh.vertices[f[0]];
        const auto& b = mesh.vertices[f[1]];
        const auto& c = mesh.vertices[f[2]];
        const std::array<double, 3> u{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
        const std::array<double, 3> v{c[0] - a[0], c[1] - a[1], c[2] - a[2]};
        const double cx = u[1] * v[2] - u[2] * v[1];
        const double cy = u[2] * v[0] - u[0] * v[2];
        const double cz = u[0] * v[1] - u[1] * v[0];
        total += 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
        cumulative.push_back(total);
    }
    require(total > 0.0, "argument", "mesh has zero surface area");
    Rng rng(seed);
    PointCloud pc(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
        const double pick = rng.uniform() * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
        const auto fi = std::min<std::size_t>(it - cumulative.begin(), mesh.faces.size() - 1);
        const auto& f = mesh.faces[fi];
        const double r1 = std::sqrt(rng.uniform()), r2 = rng.uniform();
        const double wa = 1.0 - r1, wb = r1 * (1.0 - r2), wc = r1 * r2;
        for (int a = 0; a < 3; ++a)
            pc.at(i, a) = wa * mesh.vertices[f[0]][a] + wb * mesh.vertices[f[1]][a] + wc * mesh.vertices[f[2]][a];
    }
    return pc;
}

}  // namespace ctxnet
