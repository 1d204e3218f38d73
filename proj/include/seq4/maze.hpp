#pragma once

// SAIL-style grid world: maze with tagged cells and edges, a
// deterministic action executor, bag-of-features state encoding, random
// maze/path generation, and final-state evaluation.
//
// Orientation convention (degrees, clockwise compass): 0 faces +y,
// 90 faces +x, 180 faces -y, 270 faces -x. RIGHT adds 90 (mod 360),
// LEFT subtracts 90. FORWARD moves one cell in the facing direction.

#include <array>
#include <cstdint>
#include <deque>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "seq4/autodiff.hpp"  // Tensor, ContractError
#include "seq4/corpus.hpp"    // ParseError
#include "seq4/model.hpp"     // StateTracker
#include "seq4/rng.hpp"

namespace seq4::maze {

enum class Action { FORWARD, LEFT, RIGHT, STOP };

inline std::string action_name(Action a) {
    switch (a) {
        case Action::FORWARD: return "FORWARD";
        case Action::LEFT: return "LEFT";
        case Action::RIGHT: return "RIGHT";
        case Action::STOP: return "STOP";
    }
    throw ad::ContractError("bad action value");
}

inline Action parse_action(const std::string& s) {
    if (s == "FORWARD") return Action::FORWARD;
    if (s == "LEFT") return Action::LEFT;
    if (s == "RIGHT") return Action::RIGHT;
    if (s == "STOP") return Action::STOP;
    throw corpus::ParseError("unknown action token: " + s);
}

using ActionSeq = std::vector<Action>;

// STOP must appear exactly once, as the final element.
inline void check_actions(const ActionSeq& actions) {
    if (actions.empty() || actions.back() != Action::STOP)
        throw ad::ContractError("action sequence must end with STOP");
    for (std::size_t i = 0; i + 1 < actions.size(); ++i)
        if (actions[i] == Action::STOP)
            throw ad::ContractError("STOP before the end of the action sequence");
}

struct AgentState {
    int x = 0, y = 0;
    int orientation = 0;  // degrees in {0, 90, 180, 270}
    bool operator==(const AgentState&) const = default;
};

// displacement of one FORWARD step at the given orientation
inline std::array<int, 2> delta(int orientation) {
    switch (orientation) {
        case 0: return {0, 1};
        case 90: return {1, 0};
        case 180: return {0, -1};
        case 270: return {-1, 0};
    }
    throw ad::ContractError("orientation must be one of 0/90/180/270, got " +
                            std::to_string(orientation));
}

struct BlockedMove : std::runtime_error {
    std::size_t step_index;
    BlockedMove(std::size_t idx, const std::string& what)
        : std::runtime_error(what), step_index(idx) {}
};

struct Edge {
    bool passable = false;
    int wall_tag = 0;  // meaningful for impassable edges
};

class Maze {
  public:
    Maze(int width, int height, int floor_tags, int object_tags, int wall_tags)
        : width_(width),
          height_(height),
          floor_tags_(floor_tags),
          object_tags_(object_tags),
          wall_tags_(wall_tags),
          floor_(std::size_t(width) * height, 0),
          object_(std::size_t(width) * height, 0),
          hedge_(std::size_t(std::max(width - 1, 0)) * height),
          vedge_(std::size_t(width) * std::max(height - 1, 0)) {
        if (width < 1 || height < 1 || floor_tags < 1 || object_tags < 0 || wall_tags < 1)
            throw ad::ContractError("bad maze dimensions");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int floor_tags() const { return floor_tags_; }
    int object_tags() const { return object_tags_; }
    int wall_tags() const { return wall_tags_; }

    bool in_bounds(int x, int y) const { return x >= 0 && x < width_ && y >= 0 && y < height_; }

    int floor(int x, int y) const { return floor_[cell(x, y)]; }
    int object(int x, int y) const { return object_[cell(x, y)]; }  // 0 = none, 1..object_tags
    void set_floor(int x, int y, int tag) {
        if (tag < 0 || tag >= floor_tags_) throw ad::ContractError("floor tag out of range");
        floor_[cell(x, y)] = tag;
    }
    void set_object(int x, int y, int tag) {
        if (tag < 0 || tag > object_tags_) throw ad::ContractError("object tag out of range");
        object_[cell(x, y)] = tag;
    }

    // Edges are undirected; either endpoint order works.
    bool passable(int x1, int y1, int x2, int y2) const {
        const Edge* e = edge(x1, y1, x2, y2);
        return e && e->passable;
    }
    int wall_tag(int x1, int y1, int x2, int y2) const {
        const Edge* e = edge(x1, y1, x2, y2);
        if (!e) throw ad::ContractError("wall_tag: not an in-bounds orthogonal edge");
        return e->wall_tag;
    }
    void set_edge(int x1, int y1, int x2, int y2, bool passable, int tag = 0) {
        Edge* e = const_cast<Edge*>(edge(x1, y1, x2, y2));
        if (!e) throw ad::ContractError("set_edge: not an in-bounds orthogonal edge");
        if (tag < 0 || tag >= wall_tags_) throw ad::ContractError("wall tag out of range");
        e->passable = passable;
        e->wall_tag = tag;
    }

    // Plain-text format: "width height" header, node records
    // "x y floor object", then edge records "x1 y1 x2 y2 passable walltype".
    void save(std::ostream& os) const {
        os << width_ << ' ' << height_ << '\n';
        for (int y = 0; y < height_; ++y)
            for (int x = 0; x < width_; ++x)
                os << x << ' ' << y << ' ' << floor(x, y) << ' ' << object(x, y) << '\n';
        auto dump = [&](int x1, int y1, int x2, int y2) {
            os << x1 << ' ' << y1 << ' ' << x2 << ' ' << y2 << ' ' << int(passable(x1, y1, x2, y2))
               << ' ' << wall_tag(x1, y1, x2, y2) << '\n';
        };
        for (int y = 0; y < height_; ++y)
            for (int x = 0; x + 1 < width_; ++x) dump(x, y, x + 1, y);
        for (int y = 0; y + 1 < height_; ++y)
            for (int x = 0; x < width_; ++x) dump(x, y, x, y + 1);
    }

    static Maze load(std::istream& is) {
        int w = 0, h = 0;
        if (!(is >> w >> h) || w < 1 || h < 1) throw corpus::ParseError("bad maze header");
        struct NodeRec {
            int x, y, floor, object;
        };
        struct EdgeRec {
            int x1, y1, x2, y2, passable, tag;
        };
        std::vector<NodeRec> nodes;
        std::vector<EdgeRec> edges;
        long long node_count = static_cast<long long>(w) * h;
        for (long long i = 0; i < node_count; ++i) {
            NodeRec n{};
            if (!(is >> n.x >> n.y >> n.floor >> n.object))
                throw corpus::ParseError("truncated maze node records");
            nodes.push_back(n);
        }
        long long edge_count = static_cast<long long>(w - 1) * h + static_cast<long long>(w) * (h - 1);
        for (long long i = 0; i < edge_count; ++i) {
            EdgeRec e{};
            if (!(is >> e.x1 >> e.y1 >> e.x2 >> e.y2 >> e.passable >> e.tag))
                throw corpus::ParseError("truncated maze edge records");
            edges.push_back(e);
        }
        int max_floor = 0, max_object = 0, max_wall = 0;
        for (const auto& n : nodes) {
            max_floor = std::max(max_floor, n.floor);
            max_object = std::max(max_object, n.object);
        }
        for (const auto& e : edges) max_wall = std::max(max_wall, e.tag);
        Maze m(w, h, max_floor + 1, max_object, max_wall + 1);
        for (const auto& n : nodes) {
            if (!m.in_bounds(n.x, n.y))
                throw corpus::ParseError("maze node out of bounds: " + std::to_string(n.x) + "," +
                                         std::to_string(n.y));
            m.set_floor(n.x, n.y, n.floor);
            m.set_object(n.x, n.y, n.object);
        }
        for (const auto& e : edges) m.set_edge(e.x1, e.y1, e.x2, e.y2, e.passable != 0, e.tag);
        return m;
    }

  private:
    std::size_t cell(int x, int y) const {
        if (!in_bounds(x, y))
            throw ad::ContractError("cell out of bounds: " + std::to_string(x) + "," +
                                    std::to_string(y));
        return std::size_t(y) * width_ + x;
    }

    const Edge* edge(int x1, int y1, int x2, int y2) const {
        if (!in_bounds(x1, y1) || !in_bounds(x2, y2)) return nullptr;
        if (y1 == y2 && std::abs(x1 - x2) == 1)
            return &hedge_[std::size_t(y1) * (width_ - 1) + std::min(x1, x2)];
        if (x1 == x2 && std::abs(y1 - y2) == 1)
            return &vedge_[std::size_t(std::min(y1, y2)) * width_ + x1];
        return nullptr;
    }

    int width_, height_;
    int floor_tags_, object_tags_, wall_tags_;
    std::vector<int> floor_, object_;
    std::vector<Edge> hedge_, vedge_;
};

inline void check_state(const Maze& m, const AgentState& s) {
    delta(s.orientation);  // validates orientation
    if (!m.in_bounds(s.x, s.y))
        throw ad::ContractError("agent position out of bounds: " + std::to_string(s.x) + "," +
                                std::to_string(s.y));
}

// Deterministic executor. A FORWARD through an impassable edge or out of
// bounds raises BlockedMove carrying the step index.
inline AgentState execute(const Maze& m, const AgentState& start, const ActionSeq& actions) {
    check_state(m, start);
    check_actions(actions);
    AgentState s = start;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        switch (actions[i]) {
            case Action::FORWARD: {
                auto d = delta(s.orientation);
                int nx = s.x + d[0], ny = s.y + d[1];
                if (!m.in_bounds(nx, ny) || !m.passable(s.x, s.y, nx, ny))
                    throw BlockedMove(i, "blocked FORWARD at step " + std::to_string(i) + " from " +
                                             std::to_string(s.x) + "," + std::to_string(s.y));
                s.x = nx;
                s.y = ny;
                break;
            }
            case Action::LEFT: s.orientation = (s.orientation + 270) % 360; break;
            case Action::RIGHT: s.orientation = (s.orientation + 90) % 360; break;
            case Action::STOP: return s;
        }
    }
    return s;  // unreachable: check_actions guarantees a trailing STOP
}

inline bool eval_final_state(const AgentState& predicted, const AgentState& gold) {
    return predicted == gold;
}

// Fixed-length bag-of-features encoding of (maze, agent state). Layout:
//   [0, F)                     one-hot floor type of the current cell
//   [F, F+O)                   object indicators at the current cell
//   [F+O, F+2O)                object indicators at the cell ahead
//   [F+2O, F+2O+4W)            wall-type indicators on the four incident
//                              edges in absolute order +y, +x, -y, -x
//                              (impassable in-bounds edges only)
//   [F+2O+4W, F+2O+4W+4)       passability bits relative to orientation:
//                              ahead, right, behind, left
// with F = floor_tags, O = object_tags, W = wall_tags.
inline std::size_t feature_dim(const Maze& m) {
    return std::size_t(m.floor_tags()) + 2 * std::size_t(m.object_tags()) +
           4 * std::size_t(m.wall_tags()) + 4;
}

inline ad::Tensor state_features(const Maze& m, const AgentState& s) {
    check_state(m, s);
    const int F = m.floor_tags(), O = m.object_tags(), W = m.wall_tags();
    ad::Tensor out = ad::Tensor::zeros({feature_dim(m)});
    out.v[std::size_t(m.floor(s.x, s.y))] = 1.0;
    if (int obj = m.object(s.x, s.y); obj > 0) out.v[std::size_t(F + obj - 1)] = 1.0;
    auto ahead = delta(s.orientation);
    int ax = s.x + ahead[0], ay = s.y + ahead[1];
    if (m.in_bounds(ax, ay) && m.passable(s.x, s.y, ax, ay))
        if (int obj = m.object(ax, ay); obj > 0) out.v[std::size_t(F + O + obj - 1)] = 1.0;
    for (int k = 0; k < 4; ++k) {  // absolute directions 0, 90, 180, 270
        auto d = delta(k * 90);
        int nx = s.x + d[0], ny = s.y + d[1];
        if (m.in_bounds(nx, ny) && !m.passable(s.x, s.y, nx, ny))
            out.v[std::size_t(F + 2 * O + k * W + m.wall_tag(s.x, s.y, nx, ny))] = 1.0;
    }
    for (int k = 0; k < 4; ++k) {  // relative: ahead, right, behind, left
        auto d = delta((s.orientation + k * 90) % 360);
        int nx = s.x + d[0], ny = s.y + d[1];
        if (m.in_bounds(nx, ny) && m.passable(s.x, s.y, nx, ny))
            out.v[std::size_t(F + 2 * O + 4 * W + k)] = 1.0;
    }
    return out;
}

// ---------------------------------------------------------------------
// Generation

struct MazeStats {
    int width = 21, height = 21;
    int max_corridor = 7;               // max straight run, counted in edges
    std::vector<double> floor_freq;     // per floor tag, must sum to 1
    std::vector<double> object_freq;    // per object tag; remainder = no object
    std::vector<double> wall_freq;      // per wall tag over impassable edges, sums to 1

    static MazeStats defaults() {
        MazeStats s;
        s.floor_freq = {0.40, 0.25, 0.20, 0.15};
        s.object_freq = {0.06, 0.05, 0.04};
        s.wall_freq = {0.50, 0.30, 0.20};
        return s;
    }
};

// longest straight passable run, counted in edges
inline int max_corridor_length(const Maze& m) {
    int best = 0;
    for (int y = 0; y < m.height(); ++y) {
        int run = 0;
        for (int x = 0; x + 1 < m.width(); ++x) {
            run = m.passable(x, y, x + 1, y) ? run + 1 : 0;
            best = std::max(best, run);
        }
    }
    for (int x = 0; x < m.width(); ++x) {
        int run = 0;
        for (int y = 0; y + 1 < m.height(); ++y) {
            run = m.passable(x, y, x, y + 1) ? run + 1 : 0;
            best = std::max(best, run);
        }
    }
    return best;
}

// every walkable node reachable from (0, 0) through passable edges
inline bool connected(const Maze& m) {
    std::vector<char> seen(std::size_t(m.width()) * m.height(), 0);
    std::deque<std::array<int, 2>> frontier{{0, 0}};
    seen[0] = 1;
    std::size_t visited = 1;
    while (!frontier.empty()) {
        auto [x, y] = frontier.front();
        frontier.pop_front();
        for (int k = 0; k < 4; ++k) {
            auto d = delta(k * 90);
            int nx = x + d[0], ny = y + d[1];
            if (!m.in_bounds(nx, ny) || !m.passable(x, y, nx, ny)) continue;
            std::size_t c = std::size_t(ny) * m.width() + nx;
            if (!seen[c]) {
                seen[c] = 1;
                ++visited;
                frontier.push_back({nx, ny});
            }
        }
    }
    return visited == std::size_t(m.width()) * m.height();
}

namespace detail {

// quota assignment: exact counts from frequencies, positions shuffled
inline std::vector<int> quota_tags(std::span<const double> freq, std::size_t n, bool exhaustive,
                                   Rng& rng) {
    std::vector<int> tags(n, exhaustive ? 0 : -1);  // -1 = none (objects)
    std::size_t pos = 0;
    for (std::size_t t = 0; t < freq.size(); ++t) {
        auto want = static_cast<std::size_t>(std::llround(freq[t] * static_cast<double>(n)));
        for (std::size_t i = 0; i < want && pos < n; ++i, ++pos) tags[pos] = static_cast<int>(t);
    }
    if (exhaustive)
        for (; pos < n; ++pos) tags[pos] = 0;  // rounding remainder -> tag 0
    for (std::size_t i = n; i > 1; --i) std::swap(tags[i - 1], tags[rng.uniform_int(i)]);
    return tags;
}

}  // namespace detail

// Random connected maze matching the target statistics: spanning tree by
// randomized Kruskal, extra loop passages, then straight runs longer
// than max_corridor broken by re-walling a mid-run edge whenever that
// preserves connectivity. Tags are assigned by exact quota so measured
// frequencies sit within rounding of the targets.
inline Maze generate_maze(const MazeStats& stats, std::uint64_t seed) {
    if (stats.width < 2 || stats.height < 2) throw ad::ContractError("maze too small");
    if (stats.max_corridor < 1) throw ad::ContractError("max_corridor must be >= 1");
    if (stats.floor_freq.empty() || stats.wall_freq.empty())
        throw ad::ContractError("floor and wall frequency targets required");
    auto check_freq = [](std::span<const double> f, bool exact_one, const char* what) {
        double sum = 0;
        for (double p : f) {
            if (p < 0) throw ad::ContractError(std::string(what) + ": negative frequency");
            sum += p;
        }
        if (sum > 1.0 + 1e-9) throw ad::ContractError(std::string(what) + ": frequencies sum > 1");
        if (exact_one && std::fabs(sum - 1.0) > 1e-9)
            throw ad::ContractError(std::string(what) + ": frequencies must sum to 1");
    };
    check_freq(stats.floor_freq, true, "floor_freq");
    check_freq(stats.object_freq, false, "object_freq");
    check_freq(stats.wall_freq, true, "wall_freq");

    Maze m(stats.width, stats.height, static_cast<int>(stats.floor_freq.size()),
           static_cast<int>(stats.object_freq.size()), static_cast<int>(stats.wall_freq.size()));

    struct E {
        int x1, y1, x2, y2;
    };
    std::vector<E> all_edges;
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            if (x + 1 < m.width()) all_edges.push_back({x, y, x + 1, y});
            if (y + 1 < m.height()) all_edges.push_back({x, y, x, y + 1});
        }

    Rng topo(Rng::substream(seed, "maze-topology"));
    std::vector<std::size_t> order(all_edges.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[topo.uniform_int(i)]);

    // Kruskal spanning tree
    std::vector<int> parent(std::size_t(m.width()) * m.height());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    auto cell_id = [&](int x, int y) { return y * m.width() + x; };
    for (std::size_t i : order) {
        const E& e = all_edges[i];
        int a = find(cell_id(e.x1, e.y1)), b = find(cell_id(e.x2, e.y2));
        if (a != b) {
            parent[a] = b;
            m.set_edge(e.x1, e.y1, e.x2, e.y2, true);
        }
    }
    // extra passages create loops, giving the corridor breaker room to work
    for (std::size_t i : order)
        if (topo.uniform() < 0.15) {
            const E& e = all_edges[i];
            m.set_edge(e.x1, e.y1, e.x2, e.y2, true);
        }

    // break over-long straight runs while preserving connectivity
    for (int rounds = 0; rounds < 64; ++rounds) {
        bool broke_any = false;
        auto try_break = [&](std::vector<E>&& run) {
            if (static_cast<int>(run.size()) <= stats.max_corridor) return;
            // prefer mid-run edges, fanning outward
            std::size_t mid = run.size() / 2;
            for (std::size_t off = 0; off < run.size(); ++off) {
                std::size_t i = (mid + (off % 2 ? run.size() - (off + 1) / 2 : off / 2)) % run.size();
                const E& e = run[i];
                m.set_edge(e.x1, e.y1, e.x2, e.y2, false);
                if (connected(m)) {
                    broke_any = true;
                    return;
                }
                m.set_edge(e.x1, e.y1, e.x2, e.y2, true);
            }
        };
        for (int y = 0; y < m.height(); ++y) {
            std::vector<E> run;
            for (int x = 0; x + 1 < m.width(); ++x) {
                if (m.passable(x, y, x + 1, y))
                    run.push_back({x, y, x + 1, y});
                else
                    try_break(std::move(run)), run.clear();
            }
            try_break(std::move(run));
        }
        for (int x = 0; x < m.width(); ++x) {
            std::vector<E> run;
            for (int y = 0; y + 1 < m.height(); ++y) {
                if (m.passable(x, y, x, y + 1))
                    run.push_back({x, y, x, y + 1});
                else
                    try_break(std::move(run)), run.clear();
            }
            try_break(std::move(run));
        }
        if (max_corridor_length(m) <= stats.max_corridor) break;
        if (!broke_any) {
            // stuck: open a random extra passage and retry
            const E& e = all_edges[order[topo.uniform_int(order.size())]];
            m.set_edge(e.x1, e.y1, e.x2, e.y2, true);
        }
    }
    if (max_corridor_length(m) > stats.max_corridor)
        throw ad::ContractError("generate_maze: could not satisfy max_corridor target");

    // tag assignment by exact quota
    Rng tags(Rng::substream(seed, "maze-tags"));
    std::size_t cells = std::size_t(m.width()) * m.height();
    std::vector<int> floors = detail::quota_tags(stats.floor_freq, cells, true, tags);
    std::vector<int> objects = detail::quota_tags(stats.object_freq, cells, false, tags);
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            m.set_floor(x, y, floors[std::size_t(y) * m.width() + x]);
            m.set_object(x, y, objects[std::size_t(y) * m.width() + x] + 1);  // -1 -> 0 = none
        }
    std::vector<E> walls;
    for (const E& e : all_edges)
        if (!m.passable(e.x1, e.y1, e.x2, e.y2)) walls.push_back(e);
    std::vector<int> wall_tags = detail::quota_tags(stats.wall_freq, walls.size(), true, tags);
    for (std::size_t i = 0; i < walls.size(); ++i)
        m.set_edge(walls[i].x1, walls[i].y1, walls[i].x2, walls[i].y2, false, wall_tags[i]);
    return m;
}

// ---------------------------------------------------------------------
// Path sampling

struct PathSample {
    AgentState start;
    ActionSeq actions;
    AgentState end;
};

// Uniform distinct start/end cells and start orientation; shortest walk
// by breadth-first search over (position, orientation) with FORWARD,
// LEFT and RIGHT transitions, terminated by STOP. The executor
// round-trip execute(maze, start, actions) == end holds by construction.
inline PathSample sample_path(const Maze& m, Rng& rng) {
    if (!connected(m)) throw ad::ContractError("sample_path: maze not connected");
    int cells = m.width() * m.height();
    int start_cell = static_cast<int>(rng.uniform_int(std::size_t(cells)));
    int end_cell = start_cell;
    while (end_cell == start_cell) end_cell = static_cast<int>(rng.uniform_int(std::size_t(cells)));
    AgentState start{start_cell % m.width(), start_cell / m.width(),
                     static_cast<int>(rng.uniform_int(4)) * 90};

    // BFS over (x, y, orientation/90)
    auto code = [&](int x, int y, int o) { return (y * m.width() + x) * 4 + o; };
    std::vector<int> prev(std::size_t(cells) * 4, -1);
    std::vector<Action> via(std::size_t(cells) * 4, Action::STOP);
    int s0 = code(start.x, start.y, start.orientation / 90);
    prev[std::size_t(s0)] = s0;
    std::deque<int> frontier{s0};
    int goal = -1;
    while (!frontier.empty() && goal < 0) {
        int cur = frontier.front();
        frontier.pop_front();
        int o = cur % 4, x = (cur / 4) % m.width(), y = cur / 4 / m.width();
        auto push = [&](int next, Action a) {
            if (prev[std::size_t(next)] >= 0) return;
            prev[std::size_t(next)] = cur;
            via[std::size_t(next)] = a;
            if (next / 4 == end_cell && goal < 0) goal = next;
            frontier.push_back(next);
        };
        auto d = delta(o * 90);
        int nx = x + d[0], ny = y + d[1];
        if (m.in_bounds(nx, ny) && m.passable(x, y, nx, ny))
            push(code(nx, ny, o), Action::FORWARD);
        push(code(x, y, (o + 3) % 4), Action::LEFT);
        push(code(x, y, (o + 1) % 4), Action::RIGHT);
    }
    if (goal < 0) throw ad::ContractError("sample_path: BFS failed on a connected maze");

    ActionSeq actions;
    for (int cur = goal; cur != s0; cur = prev[std::size_t(cur)])
        actions.push_back(via[std::size_t(cur)]);
    std::reverse(actions.begin(), actions.end());
    actions.push_back(Action::STOP);
    return {start, actions,
            {goal / 4 % m.width(), goal / 4 / m.width(), (goal % 4) * 90}};
}

// Path file record: "x0 y0 o0 | actions... | x1 y1 o1"
inline std::string format_path(const PathSample& p) {
    std::ostringstream os;
    os << p.start.x << ' ' << p.start.y << ' ' << p.start.orientation << " |";
    for (Action a : p.actions) os << ' ' << action_name(a);
    os << " | " << p.end.x << ' ' << p.end.y << ' ' << p.end.orientation;
    return os.str();
}

inline PathSample parse_path(const std::string& line) {
    std::size_t bar1 = line.find('|');
    std::size_t bar2 = line.rfind('|');
    if (bar1 == std::string::npos || bar2 == bar1)
        throw corpus::ParseError("path record needs two | separators: " + line);
    auto parse_state = [&](const std::string& part) {
        std::istringstream is(part);
        AgentState s;
        if (!(is >> s.x >> s.y >> s.orientation))
            throw corpus::ParseError("bad agent state in path record: " + part);
        return s;
    };
    PathSample p;
    p.start = parse_state(line.substr(0, bar1));
    p.end = parse_state(line.substr(bar2 + 1));
    std::istringstream mid(line.substr(bar1 + 1, bar2 - bar1 - 1));
    std::string tok;
    while (mid >> tok) p.actions.push_back(parse_action(tok));
    check_actions(p.actions);
    return p;
}

// ---------------------------------------------------------------------
// Model integration: tracks the simulated agent along an action-token
// sequence and feeds state features into the encoder/decoder.

class SailTracker : public model::StateTracker {
  public:
    // token_to_action maps vocabulary ids to actions; unknown ids
    // (framing tokens) leave the state unchanged.
    SailTracker(const Maze* maze, AgentState start, std::map<int, Action> token_to_action)
        : maze_(maze), state_(start), token_to_action_(std::move(token_to_action)) {
        check_state(*maze_, state_);
    }

    std::size_t dim() const override { return feature_dim(*maze_); }

    ad::Tensor features() const override { return state_features(*maze_, state_); }

    // Blocked moves freeze the agent rather than throwing: during greedy
    // decoding the model may emit invalid actions, and evaluation scores
    // those sequences as incorrect downstream.
    void advance(int token_id) override {
        auto it = token_to_action_.find(token_id);
        if (it == token_to_action_.end()) return;
        switch (it->second) {
            case Action::FORWARD: {
                auto d = delta(state_.orientation);
                int nx = state_.x + d[0], ny = state_.y + d[1];
                if (maze_->in_bounds(nx, ny) && maze_->passable(state_.x, state_.y, nx, ny)) {
                    state_.x = nx;
                    state_.y = ny;
                }
                break;
            }
            case Action::LEFT: state_.orientation = (state_.orientation + 270) % 360; break;
            case Action::RIGHT: state_.orientation = (state_.orientation + 90) % 360; break;
            case Action::STOP: break;
        }
    }

    std::unique_ptr<model::StateTracker> clone() const override {
        return std::make_unique<SailTracker>(*this);
    }

    const AgentState& state() const { return state_; }

  private:
    const Maze* maze_;
    AgentState state_;
    std::map<int, Action> token_to_action_;
};

}  // namespace seq4::maze
