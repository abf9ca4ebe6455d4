#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "ovmae/patchify.hpp"
#include "ovmae/rng.hpp"

namespace ovmae {

enum class MaskKind { random, tube, causal, frame };

inline const char* to_string(MaskKind k) {
    switch (k) {
        case MaskKind::random: return "random";
        case MaskKind::tube: return "tube";
        case MaskKind::causal: return "causal";
        case MaskKind::frame: return "frame";
    }
    return "?";
}

inline MaskKind mask_kind_from_string(const std::string& s) {
    if (s == "random") return MaskKind::random;
    if (s == "tube") return MaskKind::tube;
    if (s == "causal") return MaskKind::causal;
    if (s == "frame") return MaskKind::frame;
    throw ParamError("unknown mask kind: " + s);
}

struct MaskSpec {
    MaskKind kind = MaskKind::random;
    double ratio = 0.0; // fraction masked, in [0, 1)
    std::uint64_t seed = 0;
};

// A keep/drop partition over patch indices 0..N-1. Both lists are sorted
// ascending and together cover {0..N-1} exactly once.
struct Mask {
    std::size_t total = 0;
    std::size_t masked_count = 0;
    std::vector<std::size_t> kept;
    std::vector<std::size_t> masked;
    MaskSpec spec;

    std::size_t kept_count() const { return kept.size(); }
};

namespace detail {

// floor(n * (1 - r)) with a nudge so products that are integers in real
// arithmetic (e.g. 10 * 0.2) do not fall one short in floating point.
inline std::size_t kept_count_floor(std::size_t n, double ratio) {
    return static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * (1.0 - ratio) + 1e-9));
}

// Partial Fisher-Yates: the first k entries of a seeded shuffle, returned
// sorted. Exactly uniform over k-subsets.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                           Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace detail

inline Mask generate_mask(GridDims grid, const MaskSpec& spec) {
    const std::size_t n = grid.patch_count();
    if (n == 0) throw ParamError("generate_mask: empty grid");
    if (!(spec.ratio >= 0.0 && spec.ratio < 1.0))
        throw ParamError("generate_mask: ratio must be in [0, 1)");

    auto zero_kept_error = [&](std::size_t units, const char* what) {
        const double max_ratio = 1.0 - 1.0 / static_cast<double>(units);
        throw ParamError(std::string("generate_mask: ratio ") + std::to_string(spec.ratio) +
                         " keeps zero " + what + "; the maximum representable ratio for " +
                         std::to_string(units) + " units is " + std::to_string(max_ratio));
    };

    Rng rng(spec.seed, "mask");
    std::vector<std::size_t> kept;
    switch (spec.kind) {
        case MaskKind::random: {
            const std::size_t k = detail::kept_count_floor(n, spec.ratio);
            if (k == 0) zero_kept_error(n, "patches");
            kept = detail::sample_without_replacement(n, k, rng);
            break;
        }
        case MaskKind::tube: {
            // Keep the same spatial positions in every temporal slot.
            const std::size_t spatial = grid.nh * grid.nw;
            const std::size_t ks = detail::kept_count_floor(spatial, spec.ratio);
            if (ks == 0) zero_kept_error(spatial, "spatial positions");
            const std::vector<std::size_t> cols =
                detail::sample_without_replacement(spatial, ks, rng);
            kept.reserve(ks * grid.nt);
            for (std::size_t t = 0; t < grid.nt; ++t)
                for (std::size_t c : cols) kept.push_back(t * spatial + c);
            break;
        }
        case MaskKind::causal: {
            // Raster-order prefix; no randomness.
            const std::size_t k = detail::kept_count_floor(n, spec.ratio);
            if (k == 0) zero_kept_error(n, "patches");
            kept.resize(k);
            std::iota(kept.begin(), kept.end(), std::size_t{0});
            break;
        }
        case MaskKind::frame: {
            // Keep whole temporal slots, at least one.
            const std::size_t kt =
                std::max<std::size_t>(1, detail::kept_count_floor(grid.nt, spec.ratio));
            const std::size_t spatial = grid.nh * grid.nw;
            const std::vector<std::size_t> slots =
                detail::sample_without_replacement(grid.nt, kt, rng);
            kept.reserve(kt * spatial);
            for (std::size_t t : slots)
                for (std::size_t c = 0; c < spatial; ++c) kept.push_back(t * spatial + c);
            break;
        }
    }
    std::sort(kept.begin(), kept.end());

    Mask m;
    m.total = n;
    m.spec = spec;
    m.kept = std::move(kept);
    m.masked.reserve(n - m.kept.size());
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (next < m.kept.size() && m.kept[next] == i)
            ++next;
        else
            m.masked.push_back(i);
    }
    m.masked_count = m.masked.size();
    return m;
}

struct KeptPatches {
    Tensor rows; // K x p, gathered in kept-index order
    std::vector<std::size_t> positions;
};

inline KeptPatches apply_mask(const PatchGrid& g, const Mask& m) {
    if (m.total != g.patch_count())
        throw ShapeError("apply_mask: mask over " + std::to_string(m.total) +
                         " patches applied to grid of " + std::to_string(g.patch_count()));
    const std::size_t p = g.patches.dim(1);
    KeptPatches out;
    out.rows = Tensor({m.kept.size(), p});
    out.positions = m.kept;
    for (std::size_t r = 0; r < m.kept.size(); ++r)
        for (std::size_t j = 0; j < p; ++j)
            out.rows[r * p + j] = g.patches[m.kept[r] * p + j];
    return out;
}

// Text form for logging and replay: kind:ratio:seed:N:[kept indices].
inline std::string to_string(const Mask& m) {
    char rbuf[32];
    auto [rend, rec] = std::to_chars(rbuf, rbuf + sizeof(rbuf), m.spec.ratio);
    std::string s = std::string(to_string(m.spec.kind)) + ":" + std::string(rbuf, rend) + ":" +
                    std::to_string(m.spec.seed) + ":" + std::to_string(m.total) + ":[";
    for (std::size_t i = 0; i < m.kept.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(m.kept[i]);
    }
    s += ']';
    return s;
}

inline Mask mask_from_string(const std::string& s) {
    auto fail = [&]() { throw ParamError("mask_from_string: malformed mask: " + s); };
    std::vector<std::string> head;
    std::size_t pos = 0;
    for (int i = 0; i < 4; ++i) {
        const std::size_t c = s.find(':', pos);
        if (c == std::string::npos) fail();
        head.push_back(s.substr(pos, c - pos));
        pos = c + 1;
    }
    if (pos >= s.size() || s[pos] != '[' || s.back() != ']') fail();
    Mask m;
    m.spec.kind = mask_kind_from_string(head[0]);
    auto rres = std::from_chars(head[1].data(), head[1].data() + head[1].size(), m.spec.ratio);
    if (rres.ec != std::errc{}) fail();
    m.spec.seed = std::stoull(head[2]);
    m.total = std::stoull(head[3]);
    std::size_t i = pos + 1;
    while (i < s.size() - 1) {
        std::size_t v = 0;
        auto res = std::from_chars(s.data() + i, s.data() + s.size() - 1, v);
        if (res.ec != std::errc{}) fail();
        m.kept.push_back(v);
        i = static_cast<std::size_t>(res.ptr - s.data());
        if (i < s.size() - 1) {
            if (s[i] != ',') fail();
            ++i;
        }
    }
    if (m.kept.empty() || m.total == 0) fail(); // at least one patch is kept
    std::size_t next = 0;
    for (std::size_t j = 0; j < m.total; ++j) {
        if (next < m.kept.size() && m.kept[next] == j)
            ++next;
        else
            m.masked.push_back(j);
    }
    if (next != m.kept.size()) fail(); // kept indices must be sorted and < N
    m.masked_count = m.masked.size();
    return m;
}

} // namespace ovmae
