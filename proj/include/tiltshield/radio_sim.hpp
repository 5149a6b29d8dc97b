#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "tiltshield/errors.hpp"
#include "tiltshield/rng.hpp"

namespace tiltshield {

// Deterministic downlink simulator of a sectorised urban macro network.
// Maps per-cell downtilt angles to per-cell risk KPIs in [0,1] (high = bad):
//   cov  - fraction of attached UEs below the RSRP coverage threshold
//   cap  - attached traffic load relative to a nominal per-cell capacity
//   qual - fraction of attached UEs below the SINR quality threshold
//
// Radio model: log-distance urban-macro pathloss PL = 128.1 + 37.6*log10(d_km)
// and a parabolic sector antenna pattern 12*(angle/beamwidth)^2 with caps
// (20 dB vertical, 30 dB horizontal). No fading or shadowing; randomness
// enters only through seeded UE placement, so KPIs are bit-reproducible.

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct SimConfig {
    int n_base_stations = 7;
    int sectors_per_station = 3;
    int n_ues = 2000;
    double carrier_freq_hz = 2.0e9;
    double traffic_volume_mbps = 20.0;
    double antenna_height_m = 32.0;
    double min_tilt_deg = 1.0;
    double max_tilt_deg = 16.0;
    // 1.5 km sites put the cell edge near the reach of a 32 m mast's beam:
    // over-tilting opens coverage holes at the edge while under-tilting
    // sprays interference, which is the trade-off the tilt controller works
    // against. Denser grids leave RSRP so strong that no realistic coverage
    // cut ever fires.
    double inter_site_distance_m = 1500.0;
    double ue_height_m = 1.5;
    double rsrp_coverage_threshold_dbm = -70.0;
    // 5 dB keeps a substantial fraction of UEs near the quality cut, so the
    // interference cost of under-tilting registers per cell instead of
    // vanishing into the tail of the SINR distribution.
    double sinr_quality_threshold_db = 5.0;
    double tx_power_dbm = 46.0;
    double vertical_beamwidth_deg = 10.0;
    double horizontal_beamwidth_deg = 65.0;
    double max_antenna_gain_dbi = 15.0;
    // Thermal noise floor over a 10 MHz carrier.
    double noise_floor_dbm = -104.0;
    std::uint64_t seed = 0;

    int n_cells() const { return n_base_stations * sectors_per_station; }

    // Nominal per-cell capacity used to normalise the load KPI. Twice the
    // per-cell share of the offered traffic, so a uniformly loaded network
    // sits at cap = 0.5 and only a cell drawing twice its share saturates.
    double nominal_capacity_mbps() const {
        return 2.0 * traffic_volume_mbps / static_cast<double>(n_cells());
    }
};

inline void validate(const SimConfig& cfg) {
    auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("sim config: " + field + " " + why);
    };
    if (cfg.n_base_stations <= 0) fail("n_base_stations", "must be > 0");
    if (cfg.sectors_per_station <= 0) fail("sectors_per_station", "must be > 0");
    if (cfg.n_ues <= 0) fail("n_ues", "must be > 0");
    if (!(cfg.carrier_freq_hz > 0)) fail("carrier_freq_hz", "must be > 0");
    if (!(cfg.traffic_volume_mbps > 0)) fail("traffic_volume_mbps", "must be > 0");
    if (!(cfg.antenna_height_m > 0)) fail("antenna_height_m", "must be > 0");
    if (!(cfg.inter_site_distance_m > 0)) fail("inter_site_distance_m", "must be > 0");
    if (!(cfg.ue_height_m >= 0)) fail("ue_height_m", "must be >= 0");
    if (!(cfg.ue_height_m < cfg.antenna_height_m)) fail("ue_height_m", "must be below antenna_height_m");
    if (!(cfg.min_tilt_deg <= cfg.max_tilt_deg)) fail("min_tilt_deg", "must be <= max_tilt_deg");
    if (!(cfg.min_tilt_deg >= 0.0 && cfg.max_tilt_deg <= 90.0)) fail("max_tilt_deg", "tilt range must lie in [0, 90]");
    if (!(cfg.vertical_beamwidth_deg > 0)) fail("vertical_beamwidth_deg", "must be > 0");
    if (!(cfg.horizontal_beamwidth_deg > 0)) fail("horizontal_beamwidth_deg", "must be > 0");
}

struct NetworkLayout {
    std::vector<Vec2> cell_positions;       // one entry per cell (site repeated per sector)
    std::vector<double> cell_azimuths_deg;  // boresight azimuth per cell, 0 = +x, CCW
    std::vector<Vec2> ue_positions;

    int n_cells() const { return static_cast<int>(cell_positions.size()); }
    int n_ues() const { return static_cast<int>(ue_positions.size()); }
};

struct TiltVector {
    std::vector<double> tilts_deg;
};

struct CellKpis {
    double cov = 0.0;
    double cap = 0.0;
    double qual = 0.0;
};

namespace detail {

constexpr double kSlaVerticalDb = 20.0;
constexpr double kMaxHorizontalAttenuationDb = 30.0;
constexpr double kDegPerRad = 180.0 / std::numbers::pi;

// Hex lattice sites in spiral order: centre first, then rings of 6r sites.
inline std::vector<Vec2> hex_spiral_sites(int n_sites, double pitch) {
    std::vector<Vec2> sites;
    sites.reserve(static_cast<std::size_t>(n_sites));
    sites.push_back({0.0, 0.0});
    // axial hex directions (q, r)
    static constexpr int dq[6] = {1, 1, 0, -1, -1, 0};
    static constexpr int dr[6] = {-1, 0, 1, 1, 0, -1};
    int ring = 1;
    while (static_cast<int>(sites.size()) < n_sites) {
        int q = -ring;  // ring start: `ring` steps in direction 4 from centre
        int r = 0;
        for (int edge = 0; edge < 6 && static_cast<int>(sites.size()) < n_sites; ++edge) {
            for (int s = 0; s < ring && static_cast<int>(sites.size()) < n_sites; ++s) {
                const double x = pitch * (q + 0.5 * r);
                const double y = pitch * (std::numbers::sqrt3 / 2.0) * r;
                sites.push_back({x, y});
                q += dq[edge];
                r += dr[edge];
            }
        }
        ++ring;
    }
    return sites;
}

// Hexagonal service area centred at origin, one vertex on the +x axis.
inline bool inside_hexagon(const Vec2& p, double circumradius) {
    const double apothem = circumradius * std::numbers::sqrt3 / 2.0;
    // edge normals at 30, 90 and 150 degrees
    static const double nx[3] = {std::cos(std::numbers::pi / 6.0), 0.0, std::cos(5.0 * std::numbers::pi / 6.0)};
    static const double ny[3] = {std::sin(std::numbers::pi / 6.0), 1.0, std::sin(5.0 * std::numbers::pi / 6.0)};
    for (int k = 0; k < 3; ++k) {
        if (std::abs(p.x * nx[k] + p.y * ny[k]) > apothem) return false;
    }
    return true;
}

inline double wrap_deg(double a) {
    a = std::fmod(a + 180.0, 360.0);
    if (a < 0.0) a += 360.0;
    return a - 180.0;
}

}  // namespace detail

// Parabolic sector pattern: capped vertical + horizontal attenuation in dB.
// Zero at boresight, non-decreasing in each |offset|.
inline double pattern_loss(double vertical_off_deg, double horizontal_off_deg, const SimConfig& cfg) {
    const double v = vertical_off_deg / cfg.vertical_beamwidth_deg;
    const double h = horizontal_off_deg / cfg.horizontal_beamwidth_deg;
    const double vert = std::min(12.0 * v * v, detail::kSlaVerticalDb);
    const double horiz = std::min(12.0 * h * h, detail::kMaxHorizontalAttenuationDb);
    return vert + horiz;
}

// Urban-macro log-distance pathloss at 2 GHz; distance clamped below 1 m.
inline double pathloss(double distance_m, const SimConfig&) {
    const double d_km = std::max(distance_m, 1.0) / 1000.0;
    return 128.1 + 37.6 * std::log10(d_km);
}

inline NetworkLayout build_layout(const SimConfig& cfg) {
    validate(cfg);
    NetworkLayout layout;
    const auto sites = detail::hex_spiral_sites(cfg.n_base_stations, cfg.inter_site_distance_m);
    const double sector_step = 360.0 / cfg.sectors_per_station;
    for (const auto& site : sites) {
        for (int s = 0; s < cfg.sectors_per_station; ++s) {
            layout.cell_positions.push_back(site);
            layout.cell_azimuths_deg.push_back(sector_step * s);
        }
    }

    double max_site_radius = 0.0;
    for (const auto& site : sites) {
        max_site_radius = std::max(max_site_radius, std::hypot(site.x, site.y));
    }
    const double service_radius = max_site_radius + 0.5 * cfg.inter_site_distance_m;

    Rng rng = Rng::derive(cfg.seed, {0x7565706f73ull});  // UE placement substream
    layout.ue_positions.reserve(static_cast<std::size_t>(cfg.n_ues));
    while (layout.n_ues() < cfg.n_ues) {
        Vec2 p{rng.uniform_real(-service_radius, service_radius),
               rng.uniform_real(-service_radius, service_radius)};
        if (detail::inside_hexagon(p, service_radius)) layout.ue_positions.push_back(p);
    }
    return layout;
}

// Tilt-independent per-link terms, precomputed once per layout. Only the
// vertical pattern term depends on tilt, so a KPI evaluation per step is a
// subtract-square-min over this table.
struct LinkGeometry {
    int n_cells = 0;
    int n_ues = 0;
    std::vector<double> base_dbm;         // tx + gain - horiz pattern - pathloss, [ue * n_cells + cell]
    std::vector<double> depression_deg;   // angle below horizontal from antenna to UE
};

inline LinkGeometry precompute_geometry(const NetworkLayout& layout, const SimConfig& cfg) {
    if (layout.n_cells() != cfg.n_cells()) {
        throw ContractError("layout has " + std::to_string(layout.n_cells()) +
                            " cells but config implies " + std::to_string(cfg.n_cells()));
    }
    LinkGeometry geom;
    geom.n_cells = layout.n_cells();
    geom.n_ues = layout.n_ues();
    geom.base_dbm.resize(static_cast<std::size_t>(geom.n_cells) * geom.n_ues);
    geom.depression_deg.resize(geom.base_dbm.size());

    const double height_delta = cfg.antenna_height_m - cfg.ue_height_m;
    for (int u = 0; u < geom.n_ues; ++u) {
        const Vec2 ue = layout.ue_positions[static_cast<std::size_t>(u)];
        for (int c = 0; c < geom.n_cells; ++c) {
            const Vec2 cell = layout.cell_positions[static_cast<std::size_t>(c)];
            const double dx = ue.x - cell.x;
            const double dy = ue.y - cell.y;
            const double dist = std::max(std::hypot(dx, dy), 1.0);
            const double bearing = std::atan2(dy, dx) * detail::kDegPerRad;
            const double h_off = detail::wrap_deg(bearing - layout.cell_azimuths_deg[static_cast<std::size_t>(c)]);
            const double horiz = std::min(
                12.0 * (h_off / cfg.horizontal_beamwidth_deg) * (h_off / cfg.horizontal_beamwidth_deg),
                detail::kMaxHorizontalAttenuationDb);
            const std::size_t idx = static_cast<std::size_t>(u) * geom.n_cells + c;
            geom.base_dbm[idx] = cfg.tx_power_dbm + cfg.max_antenna_gain_dbi - horiz - pathloss(dist, cfg);
            geom.depression_deg[idx] = std::atan2(height_delta, dist) * detail::kDegPerRad;
        }
    }
    return geom;
}

inline std::vector<CellKpis> compute_kpis(const LinkGeometry& geom, const TiltVector& tilts, const SimConfig& cfg) {
    if (static_cast<int>(tilts.tilts_deg.size()) != geom.n_cells) {
        throw ContractError("tilt vector has " + std::to_string(tilts.tilts_deg.size()) +
                            " entries for " + std::to_string(geom.n_cells) + " cells");
    }
    for (std::size_t c = 0; c < tilts.tilts_deg.size(); ++c) {
        const double t = tilts.tilts_deg[c];
        if (!(t >= cfg.min_tilt_deg && t <= cfg.max_tilt_deg)) {
            throw DomainError("tilt " + std::to_string(t) + " for cell " + std::to_string(c) +
                              " outside [" + std::to_string(cfg.min_tilt_deg) + ", " +
                              std::to_string(cfg.max_tilt_deg) + "]");
        }
    }

    const int n_cells = geom.n_cells;
    const double noise_mw = std::pow(10.0, cfg.noise_floor_dbm / 10.0);

    std::vector<int> attached(static_cast<std::size_t>(n_cells), 0);
    std::vector<int> cov_fail(static_cast<std::size_t>(n_cells), 0);
    std::vector<int> qual_fail(static_cast<std::size_t>(n_cells), 0);

    std::vector<double> rx_dbm(static_cast<std::size_t>(n_cells));
    std::vector<double> rx_mw(static_cast<std::size_t>(n_cells));

    for (int u = 0; u < geom.n_ues; ++u) {
        const std::size_t base = static_cast<std::size_t>(u) * n_cells;
        int serving = 0;
        for (int c = 0; c < n_cells; ++c) {
            const double off = geom.depression_deg[base + c] - tilts.tilts_deg[static_cast<std::size_t>(c)];
            const double v = off / cfg.vertical_beamwidth_deg;
            const double vert = std::min(12.0 * v * v, detail::kSlaVerticalDb);
            rx_dbm[static_cast<std::size_t>(c)] = geom.base_dbm[base + c] - vert;
            if (rx_dbm[static_cast<std::size_t>(c)] > rx_dbm[static_cast<std::size_t>(serving)]) serving = c;
        }
        for (int c = 0; c < n_cells; ++c) {
            rx_mw[static_cast<std::size_t>(c)] = std::pow(10.0, rx_dbm[static_cast<std::size_t>(c)] / 10.0);
        }
        // Summing in sorted order makes the interference total independent
        // of cell labelling, so KPI output is exactly permutation-equivariant.
        std::sort(rx_mw.begin(), rx_mw.end());
        double total_mw = 0.0;
        for (double p : rx_mw) total_mw += p;

        const double serve_dbm = rx_dbm[static_cast<std::size_t>(serving)];
        const double serve_mw = std::pow(10.0, serve_dbm / 10.0);
        const double interference_mw = std::max(total_mw - serve_mw, 0.0);
        const double sinr_db = 10.0 * std::log10(serve_mw / (interference_mw + noise_mw));

        attached[static_cast<std::size_t>(serving)] += 1;
        if (serve_dbm < cfg.rsrp_coverage_threshold_dbm) cov_fail[static_cast<std::size_t>(serving)] += 1;
        if (sinr_db < cfg.sinr_quality_threshold_db) qual_fail[static_cast<std::size_t>(serving)] += 1;
    }

    std::vector<CellKpis> kpis(static_cast<std::size_t>(n_cells));
    for (int c = 0; c < n_cells; ++c) {
        const int n = attached[static_cast<std::size_t>(c)];
        if (n == 0) continue;  // unserved cell reports zero risk
        CellKpis& k = kpis[static_cast<std::size_t>(c)];
        k.cov = static_cast<double>(cov_fail[static_cast<std::size_t>(c)]) / n;
        k.qual = static_cast<double>(qual_fail[static_cast<std::size_t>(c)]) / n;
        const double load_mbps = n * cfg.traffic_volume_mbps / static_cast<double>(geom.n_ues);
        k.cap = std::clamp(load_mbps / cfg.nominal_capacity_mbps(), 0.0, 1.0);
        k.cov = std::clamp(k.cov, 0.0, 1.0);
        k.qual = std::clamp(k.qual, 0.0, 1.0);
    }
    return kpis;
}

inline std::vector<CellKpis> compute_kpis(const NetworkLayout& layout, const TiltVector& tilts, const SimConfig& cfg) {
    return compute_kpis(precompute_geometry(layout, cfg), tilts, cfg);
}

}  // namespace tiltshield
