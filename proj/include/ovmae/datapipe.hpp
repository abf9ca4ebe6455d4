#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ovmae/patchify.hpp"
#include "ovmae/rng.hpp"

namespace ovmae {

// A named source of samples. Synthetic datasets generate pixels on the fly
// from (seed, id); manifest-backed datasets carry one file path per id.
struct DatasetHandle {
    std::string name;
    Modality modality = Modality::image;
    std::size_t count = 0;
    std::uint64_t seed = 0;
    std::size_t height = 32, width = 32, frames = 1; // synthetic geometry
    std::vector<std::string> files;                  // empty for synthetic data

    void validate() const {
        if (count == 0) throw ParamError("dataset " + name + ": sample count must be >= 1");
        if (!files.empty() && files.size() != count)
            throw ParamError("dataset " + name + ": manifest size does not match count");
    }
};

struct BatchSlot {
    std::size_t sample_id = 0;
    std::uint64_t mask_seed = 0;
};

struct MiniBatch {
    std::string dataset;
    Modality modality = Modality::image;
    std::vector<BatchSlot> slots;    // exactly B, single modality
    std::size_t distinct_loads = 0;  // B / R distinct sample ids
};

struct BatchPlan {
    std::vector<MiniBatch> batches;
    std::size_t batch_size = 0;
    std::map<std::string, std::size_t> replication; // per dataset name
    std::map<std::string, std::size_t> ratios;      // per dataset name
    std::uint64_t seed = 0;

    std::size_t step_count() const { return batches.size(); }
    std::size_t distinct_load_count() const {
        std::size_t n = 0;
        for (const MiniBatch& b : batches) n += b.distinct_loads;
        return n;
    }
};

struct PlanOptions {
    std::size_t batch_size = 4;
    std::map<Modality, std::size_t> replication; // default 1
    std::map<std::string, std::size_t> ratios;   // per dataset name, default 1
    std::uint64_t seed = 0;
};

// Builds one epoch of single-modality mini-batches. Each dataset contributes
// count*ratio slots; with replication R a batch holds B/R distinct ids, each
// replicated R times, so an epoch's step count is independent of R while its
// distinct loads scale as 1/R. Every slot carries its own mask seed
// (pairwise distinct across the plan), so replicas never share a mask.
// Batch order is a seeded uniform shuffle.
inline BatchPlan build_epoch_plan(const std::vector<DatasetHandle>& datasets,
                                  const PlanOptions& opts) {
    if (opts.batch_size == 0) throw ParamError("plan: batch size must be positive");
    BatchPlan plan;
    plan.batch_size = opts.batch_size;
    plan.seed = opts.seed;
    Rng root(opts.seed, "plan");
    Rng mask_seeds = root.child("mask-seeds");
    std::uint64_t slot_counter = 0;

    for (const DatasetHandle& d : datasets) {
        d.validate();
        const auto rit = opts.replication.find(d.modality);
        const std::size_t r = rit == opts.replication.end() ? 1 : rit->second;
        if (r == 0) throw ParamError("plan: replication must be >= 1");
        if (opts.batch_size % r != 0)
            throw ParamError("plan: replication " + std::to_string(r) +
                             " does not divide batch size " + std::to_string(opts.batch_size));
        const std::size_t loads_per_batch = opts.batch_size / r;
        if (d.count % loads_per_batch != 0)
            throw ParamError("plan: dataset " + d.name + " count " + std::to_string(d.count) +
                             " is not a multiple of B/R = " + std::to_string(loads_per_batch));
        const auto qit = opts.ratios.find(d.name);
        const std::size_t ratio = qit == opts.ratios.end() ? 1 : qit->second;
        if (ratio == 0) throw ParamError("plan: dataset ratio must be >= 1");
        plan.replication[d.name] = r;
        plan.ratios[d.name] = ratio;

        // Slot budget count*ratio; the load sequence is `ratio` independent
        // shuffles of the ids, so at R=1 every id appears exactly `ratio`
        // times per epoch. With R>1 the epoch consumes the first
        // count*ratio/R entries (a uniform subsample).
        std::vector<std::size_t> sequence;
        sequence.reserve(d.count * ratio);
        for (std::size_t rep = 0; rep < ratio; ++rep) {
            std::vector<std::size_t> ids(d.count);
            std::iota(ids.begin(), ids.end(), std::size_t{0});
            Rng shuffle = root.child("shuffle:" + d.name + ":" + std::to_string(rep));
            for (std::size_t i = d.count; i > 1; --i)
                std::swap(ids[i - 1], ids[shuffle.next_below(i)]);
            sequence.insert(sequence.end(), ids.begin(), ids.end());
        }
        const std::size_t slots = d.count * ratio;
        if (slots % opts.batch_size != 0)
            throw ParamError("plan: dataset " + d.name + " slot budget " +
                             std::to_string(slots) + " is not a multiple of batch size");
        const std::size_t steps = slots / opts.batch_size;
        for (std::size_t s = 0; s < steps; ++s) {
            MiniBatch mb;
            mb.dataset = d.name;
            mb.modality = d.modality;
            mb.distinct_loads = loads_per_batch;
            mb.slots.reserve(opts.batch_size);
            for (std::size_t l = 0; l < loads_per_batch; ++l) {
                const std::size_t id = sequence[s * loads_per_batch + l];
                for (std::size_t rep = 0; rep < r; ++rep)
                    mb.slots.push_back(BatchSlot{id, mask_seeds.at(slot_counter++)});
            }
            plan.batches.push_back(std::move(mb));
        }
    }

    // Uniform-random modality interleaving.
    Rng order = root.child("order");
    for (std::size_t i = plan.batches.size(); i > 1; --i)
        std::swap(plan.batches[i - 1], plan.batches[order.next_below(i)]);
    return plan;
}

// Line-oriented plan serialization for replay.
inline std::string to_string(const BatchPlan& plan) {
    std::ostringstream os;
    os << "plan B=" << plan.batch_size << " seed=" << plan.seed << "\n";
    for (const MiniBatch& b : plan.batches) {
        os << "batch dataset=" << b.dataset << " modality=" << to_string(b.modality)
           << " loads=" << b.distinct_loads << " slots=";
        for (std::size_t i = 0; i < b.slots.size(); ++i) {
            if (i) os << ',';
            os << b.slots[i].sample_id << ':' << b.slots[i].mask_seed;
        }
        os << "\n";
    }
    return os.str();
}

inline BatchPlan plan_from_string(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    BatchPlan plan;
    auto fail = [&](const std::string& l) {
        throw ParamError("plan_from_string: malformed line: " + l);
    };
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "plan") {
            std::string field;
            while (ls >> field) {
                if (field.rfind("B=", 0) == 0) plan.batch_size = std::stoul(field.substr(2));
                else if (field.rfind("seed=", 0) == 0) plan.seed = std::stoull(field.substr(5));
            }
        } else if (tag == "batch") {
            MiniBatch mb;
            std::string field;
            while (ls >> field) {
                if (field.rfind("dataset=", 0) == 0) mb.dataset = field.substr(8);
                else if (field.rfind("modality=", 0) == 0)
                    mb.modality = field.substr(9) == "video" ? Modality::video : Modality::image;
                else if (field.rfind("loads=", 0) == 0)
                    mb.distinct_loads = std::stoul(field.substr(6));
                else if (field.rfind("slots=", 0) == 0) {
                    std::istringstream ss(field.substr(6));
                    std::string slot;
                    while (std::getline(ss, slot, ',')) {
                        const std::size_t colon = slot.find(':');
                        if (colon == std::string::npos) fail(line);
                        mb.slots.push_back(BatchSlot{std::stoul(slot.substr(0, colon)),
                                                     std::stoull(slot.substr(colon + 1))});
                    }
                }
            }
            if (mb.slots.empty()) fail(line);
            plan.batches.push_back(std::move(mb));
        } else {
            fail(line);
        }
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Discrete-event simulation of an asynchronous loading pipeline.

// Costs in milliseconds. A sample request occupies one in-flight slot from
// read issue until its decode finishes; reads overlap freely within the
// in-flight budget, decodes contend for workers.
struct IoModel {
    double read_mean_ms = 40.0;
    double read_jitter_ms = 0.0; // uniform in [mean - jitter, mean + jitter]
    double decode_ms = 60.0;
    double compute_ms = 50.0; // per training step
    std::size_t workers = 8;
    std::size_t max_in_flight = 32;

    void validate() const {
        if (read_mean_ms < 0 || read_jitter_ms < 0 || decode_ms < 0 || compute_ms < 0)
            throw ParamError("io model: costs must be >= 0");
        if (workers == 0 || max_in_flight == 0)
            throw ParamError("io model: workers and in-flight must be >= 1");
    }
};

struct BatchTrace {
    std::size_t batch_index = 0;
    double ready_ms = 0;   // all distinct samples loaded and decoded
    double start_ms = 0;   // compute start
    double done_ms = 0;    // compute end
};

struct SimResult {
    double epoch_ms = 0;
    std::size_t distinct_loads = 0;
    std::size_t steps = 0;
    std::vector<BatchTrace> trace;
};

// Replicated slots cost nothing to load: only the distinct ids of each batch
// go through read+decode. Compute consumes ready batches in plan order.
inline SimResult simulate_epoch(const BatchPlan& plan, const IoModel& io, std::uint64_t seed) {
    io.validate();
    struct Request {
        std::size_t batch = 0;
        double read_ms = 0;
    };
    std::vector<Request> requests;
    std::vector<std::size_t> remaining(plan.batches.size(), 0);
    Rng lat(seed, "io-latency");
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
        const std::size_t loads = plan.batches[b].distinct_loads;
        remaining[b] = loads;
        for (std::size_t l = 0; l < loads; ++l) {
            const double jitter = io.read_jitter_ms * (2.0 * lat.next_uniform() - 1.0);
            requests.push_back(Request{b, std::max(0.0, io.read_mean_ms + jitter)});
        }
    }

    std::vector<double> ready(plan.batches.size(), 0.0);
    // Event-driven core: (time, kind, request index); kind 0 = read done,
    // kind 1 = decode done. Ties break on kind then request index so the
    // result is independent of queue internals.
    using Event = std::tuple<double, int, std::size_t>;
    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events;
    std::queue<std::size_t> decode_queue;
    std::size_t next_request = 0, in_flight = 0, free_workers = io.workers;
    double now = 0.0;

    auto issue = [&]() {
        while (next_request < requests.size() && in_flight < io.max_in_flight) {
            events.emplace(now + requests[next_request].read_ms, 0, next_request);
            ++in_flight;
            ++next_request;
        }
    };
    auto start_decodes = [&]() {
        while (free_workers > 0 && !decode_queue.empty()) {
            const std::size_t r = decode_queue.front();
            decode_queue.pop();
            --free_workers;
            events.emplace(now + io.decode_ms, 1, r);
        }
    };

    issue();
    while (!events.empty()) {
        auto [t, kind, r] = events.top();
        events.pop();
        now = t;
        if (kind == 0) {
            decode_queue.push(r);
            start_decodes();
        } else {
            ++free_workers;
            --in_flight;
            if (--remaining[requests[r].batch] == 0) ready[requests[r].batch] = now;
            issue();
            start_decodes();
        }
    }

    SimResult res;
    res.steps = plan.batches.size();
    res.distinct_loads = requests.size();
    res.trace.reserve(plan.batches.size());
    double compute_free = 0.0;
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
        BatchTrace tr;
        tr.batch_index = b;
        tr.ready_ms = ready[b];
        tr.start_ms = std::max(ready[b], compute_free);
        tr.done_ms = tr.start_ms + io.compute_ms;
        compute_free = tr.done_ms;
        res.trace.push_back(tr);
    }
    res.epoch_ms = plan.batches.empty() ? 0.0 : res.trace.back().done_ms;
    return res;
}

// ---------------------------------------------------------------------------
// Synthetic samples: deterministic in (dataset seed, id). Images are smooth
// two-axis gradients with a few solid rectangles; videos translate their
// rectangles at a constant per-id velocity over a static background, so the
// data has real temporal structure.

// A solid rectangle at (x0, y0) translating by (vx, vy) per frame.
struct SceneRect {
    long x0 = 0, y0 = 0, w = 0, h = 0;
    long vx = 0, vy = 0; // per-frame translation (videos only)
    double color[3] = {0, 0, 0};
};

namespace detail {

inline void draw_rect(Tensor& pixels, std::size_t frame, const SceneRect& r, long k,
                      std::size_t height, std::size_t width) {
    const long x0 = r.x0 + k * r.vx;
    const long y0 = r.y0 + k * r.vy;
    for (long y = y0; y < y0 + r.h; ++y) {
        if (y < 0 || y >= static_cast<long>(height)) continue;
        for (long x = x0; x < x0 + r.w; ++x) {
            if (x < 0 || x >= static_cast<long>(width)) continue;
            for (std::size_t c = 0; c < 3; ++c)
                pixels[((frame * height + static_cast<std::size_t>(y)) * width +
                        static_cast<std::size_t>(x)) *
                           3 +
                       c] = r.color[c];
        }
    }
}

} // namespace detail

// A generated sample plus the geometry it was drawn from; tests verify the
// temporal-shift structure against the rectangle list.
struct SyntheticScene {
    VisualTensor sample;
    std::vector<SceneRect> rects;
};

inline SyntheticScene generate_synthetic_scene(const DatasetHandle& d, std::size_t id) {
    if (id >= d.count) throw IndexError("generate_synthetic: id out of range");
    const std::size_t frames = d.modality == Modality::image ? 1 : d.frames;
    const std::size_t h = d.height, w = d.width;
    Rng rng = Rng(d.seed, "synth").child(d.name).child(id);

    Tensor px({frames, h, w, 3});
    // Static background: per-channel affine ramp, quantized to integers. The
    // slope magnitude stays well above the quantization step so ramps do not
    // degenerate into isolated staircase edges.
    double base[3], gx[3], gy[3];
    for (std::size_t c = 0; c < 3; ++c) {
        base[c] = 70.0 + 110.0 * rng.next_uniform();
        const double mx = 25.0 + 35.0 * rng.next_uniform();
        const double my = 25.0 + 35.0 * rng.next_uniform();
        gx[c] = rng.next_below(2) ? mx : -mx;
        gy[c] = rng.next_below(2) ? my : -my;
    }
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                const double fx = w > 1 ? static_cast<double>(x) / (w - 1) : 0.0;
                const double fy = h > 1 ? static_cast<double>(y) / (h - 1) : 0.0;
                double v = base[c] + gx[c] * fx + gy[c] * fy;
                v = std::min(255.0, std::max(0.0, std::floor(v)));
                px[((0 * h + y) * w + x) * 3 + c] = v;
            }
    for (std::size_t f = 1; f < frames; ++f)
        for (std::size_t i = 0; i < h * w * 3; ++i) px[f * h * w * 3 + i] = px[i];

    // Rectangle geometry snaps to a 4px lattice. Free placement can clip a
    // patch by a single pixel, and after per-patch normalization such a
    // sliver becomes an outlier target of magnitude ~sqrt(pixels per patch).
    // Trajectories are kept disjoint so every rectangle owns its pixels in
    // every frame.
    std::vector<SceneRect> accepted;
    const long lw = static_cast<long>(w), lh = static_cast<long>(h);
    const std::size_t rect_count = 1 + rng.next_below(2);
    for (std::size_t ri = 0; ri < rect_count; ++ri) {
        SceneRect r;
        r.w = 4 * static_cast<long>(2 + rng.next_below(std::max<std::size_t>(1, w / 16)));
        r.h = 4 * static_cast<long>(2 + rng.next_below(std::max<std::size_t>(1, h / 16)));
        for (std::size_t c = 0; c < 3; ++c) {
            // Offset from the background so the rectangle never degenerates
            // into a near-invisible (and, once normalized, noise-amplified)
            // pattern.
            const double offset = 60.0 + 60.0 * rng.next_uniform();
            const double v = base[c] + (rng.next_below(2) ? offset : -offset);
            r.color[c] = std::min(255.0, std::max(0.0, std::floor(v)));
        }
        if (r.w > lw || r.h > lh) continue;
        auto snapped = [&](long lo, long hi) -> long {
            // Uniform over multiples of 4 in [lo, hi]; -1 when none exist.
            const long first = (lo + 3) / 4;
            const long last = hi / 4;
            if (last < first) return -1;
            return 4 * (first + static_cast<long>(rng.next_below(
                                    static_cast<std::uint64_t>(last - first + 1))));
        };
        if (frames > 1) {
            // Velocity first, then a start position whose whole trajectory
            // stays inside the frame.
            do {
                r.vx = static_cast<long>(rng.next_below(5)) - 2;
                r.vy = static_cast<long>(rng.next_below(5)) - 2;
            } while (r.vx == 0 && r.vy == 0);
            const long span_x = r.vx * static_cast<long>(frames - 1);
            const long span_y = r.vy * static_cast<long>(frames - 1);
            const long lo_x = std::max(0L, -span_x);
            const long hi_x = std::min(lw - r.w, lw - r.w - span_x);
            const long lo_y = std::max(0L, -span_y);
            const long hi_y = std::min(lh - r.h, lh - r.h - span_y);
            if (hi_x < lo_x || hi_y < lo_y) continue; // no room; skip this rectangle
            r.x0 = snapped(lo_x, hi_x);
            r.y0 = snapped(lo_y, hi_y);
        } else {
            r.x0 = snapped(0, lw - r.w);
            r.y0 = snapped(0, lh - r.h);
        }
        if (r.x0 < 0 || r.y0 < 0) continue;

        auto trajectory_box = [&](const SceneRect& q) {
            const long sx = q.vx * static_cast<long>(frames - 1);
            const long sy = q.vy * static_cast<long>(frames - 1);
            struct Box { long x0, y0, x1, y1; };
            return Box{q.x0 + std::min(0L, sx), q.y0 + std::min(0L, sy),
                       q.x0 + q.w + std::max(0L, sx), q.y0 + q.h + std::max(0L, sy)};
        };
        bool overlaps = false;
        for (const SceneRect& q : accepted) {
            const auto a = trajectory_box(r), b = trajectory_box(q);
            overlaps = overlaps ||
                       (a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1);
        }
        if (overlaps) continue;
        accepted.push_back(r);
        for (std::size_t f = 0; f < frames; ++f)
            detail::draw_rect(px, f, r, static_cast<long>(f), h, w);
    }

    SyntheticScene scene;
    scene.sample.pixels = std::move(px);
    scene.sample.modality = d.modality;
    scene.rects = std::move(accepted);
    return scene;
}

inline VisualTensor generate_synthetic(const DatasetHandle& d, std::size_t id) {
    return generate_synthetic_scene(d, id).sample;
}

} // namespace ovmae
