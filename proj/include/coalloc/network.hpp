#pragma once

#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coalloc/errors.hpp"
#include "coalloc/tolerances.hpp"

namespace coalloc {

struct Zone {
    std::string id;
    int index = -1; // position in Topology::zones, contiguous from 0
};

// Transmission corridor between two zones.  The from->to direction is the
// reference direction for flow signs; capacity is a symmetric |flow| limit.
struct Line {
    int id = -1;
    std::string from;
    std::string to;
    double susceptance = 1.0; // > 0
    double capacity = 0.0;    // >= 0; 0 means the line carries nothing
};

struct Topology {
    std::vector<Zone> zones;
    std::vector<Line> lines;
    std::string slack; // reference zone for the PTDF

    int zone_index(const std::string& id) const {
        for (const Zone& z : zones)
            if (z.id == id) return z.index;
        throw InputError("unknown zone '" + id + "'");
    }

    bool has_zone(const std::string& id) const {
        for (const Zone& z : zones)
            if (z.id == id) return true;
        return false;
    }
};

// Structural validation shared by make_topology and build_ptdf.  Throws
// StructuralError / InputError; returns normally iff the topology is a
// connected graph with sane line data and a valid slack.
inline void check_topology(const Topology& topo) {
    if (topo.zones.empty()) throw StructuralError("topology has no zones");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < topo.zones.size(); ++i) {
        const Zone& z = topo.zones[i];
        if (z.id.empty()) throw InputError("zone with empty id");
        if (!ids.insert(z.id).second)
            throw InputError("duplicate zone id '" + z.id + "'");
        if (z.index != static_cast<int>(i))
            throw StructuralError("zone indices must be contiguous from 0 in listed order");
    }
    if (!topo.has_zone(topo.slack))
        throw StructuralError("slack zone '" + topo.slack + "' is not a member of the topology");

    std::set<int> line_ids;
    for (const Line& l : topo.lines) {
        if (!line_ids.insert(l.id).second)
            throw InputError("duplicate line id " + std::to_string(l.id));
        if (!topo.has_zone(l.from) || !topo.has_zone(l.to))
            throw StructuralError("line " + std::to_string(l.id) + " references an unknown zone");
        if (l.from == l.to)
            throw StructuralError("line " + std::to_string(l.id) + " is a self-loop");
        if (!(l.susceptance > 0.0))
            throw StructuralError("line " + std::to_string(l.id) + " has nonpositive susceptance");
        if (l.capacity < 0.0)
            throw StructuralError("line " + std::to_string(l.id) + " has negative capacity");
    }

    // Connectivity over the undirected line graph.
    std::map<std::string, std::vector<std::string>> adj;
    for (const Line& l : topo.lines) {
        adj[l.from].push_back(l.to);
        adj[l.to].push_back(l.from);
    }
    std::set<std::string> seen;
    std::queue<std::string> frontier;
    frontier.push(topo.zones.front().id);
    seen.insert(topo.zones.front().id);
    while (!frontier.empty()) {
        std::string cur = frontier.front();
        frontier.pop();
        for (const std::string& nxt : adj[cur])
            if (seen.insert(nxt).second) frontier.push(nxt);
    }
    if (seen.size() != topo.zones.size())
        throw StructuralError("topology is not connected");
}

inline Topology make_topology(const std::vector<std::string>& zone_ids,
                              std::vector<Line> lines,
                              const std::string& slack) {
    Topology topo;
    topo.zones.reserve(zone_ids.size());
    for (std::size_t i = 0; i < zone_ids.size(); ++i)
        topo.zones.push_back(Zone{zone_ids[i], static_cast<int>(i)});
    topo.lines = std::move(lines);
    topo.slack = slack;
    check_topology(topo);
    return topo;
}

// Zone-to-line sensitivity table.  Row z, column j holds the load put on
// line j (in its from->to reference direction) when 1 MW is transferred from
// the slack to zone z, i.e. injected at the slack and withdrawn at z.  The
// slack row is identically zero.
struct PtdfMatrix {
    std::string slack;
    int slack_index = -1;
    std::vector<std::string> zone_order; // topology order, all zones
    std::vector<int> line_ids;           // topology order
    Eigen::MatrixXd table;               // zones x lines

    double entry(int zone_index, int line_pos) const { return table(zone_index, line_pos); }

    int line_pos(int line_id) const {
        for (std::size_t j = 0; j < line_ids.size(); ++j)
            if (line_ids[j] == line_id) return static_cast<int>(j);
        throw InputError("unknown line id " + std::to_string(line_id));
    }
};

// DC sensitivity factors from the weighted graph Laplacian.  The slack row
// and column are removed, the reduced system is inverted, and line flows are
// read off the resulting potentials.  Connected topology => invertible
// reduced Laplacian; a singular solve still raises StructuralError.
inline PtdfMatrix build_ptdf(const Topology& topo) {
    check_topology(topo);

    const int n = static_cast<int>(topo.zones.size());
    const int m = static_cast<int>(topo.lines.size());
    const int slack = topo.zone_index(topo.slack);

    PtdfMatrix out;
    out.slack = topo.slack;
    out.slack_index = slack;
    for (const Zone& z : topo.zones) out.zone_order.push_back(z.id);
    for (const Line& l : topo.lines) out.line_ids.push_back(l.id);
    out.table = Eigen::MatrixXd::Zero(n, m);
    if (n == 1) return out; // single zone: nothing can flow

    // red[z]: row/col of zone z in the reduced Laplacian, -1 for the slack.
    std::vector<int> red(n, -1);
    int next = 0;
    for (int z = 0; z < n; ++z)
        if (z != slack) red[z] = next++;

    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n - 1, n - 1);
    for (const Line& l : topo.lines) {
        const int u = topo.zone_index(l.from);
        const int v = topo.zone_index(l.to);
        if (red[u] >= 0) lap(red[u], red[u]) += l.susceptance;
        if (red[v] >= 0) lap(red[v], red[v]) += l.susceptance;
        if (red[u] >= 0 && red[v] >= 0) {
            lap(red[u], red[v]) -= l.susceptance;
            lap(red[v], red[u]) -= l.susceptance;
        }
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(lap);
    if (!lu.isInvertible())
        throw StructuralError("reduced Laplacian is singular");
    // inv(z, i): potential sensitivity of zone z to a unit withdrawal at i.
    const Eigen::MatrixXd inv = lu.inverse();

    for (int i = 0; i < n; ++i) {
        if (i == slack) continue;
        for (int j = 0; j < m; ++j) {
            const Line& l = topo.lines[j];
            const int u = topo.zone_index(l.from);
            const int v = topo.zone_index(l.to);
            // Transfer of 1 MW from the slack to zone i: reduced injection
            // vector -e_i, potentials -inv(., i), slack potential 0.  The
            // flow on u->v is susceptance * (theta_u - theta_v).
            const double theta_u = (u == slack) ? 0.0 : -inv(red[u], red[i]);
            const double theta_v = (v == slack) ? 0.0 : -inv(red[v], red[i]);
            out.table(i, j) = l.susceptance * (theta_u - theta_v);
        }
    }
    return out;
}

// Line flows for a balanced injection vector (MW per zone, positive =
// injection into the grid).  Zones missing from the map inject 0.  A zone
// injecting inj_z acts as a transfer of inj_z from z to the slack, which is
// -inj_z times its sensitivity row; flows = -table^T * inj.
inline std::vector<double> flows_from_injections(const PtdfMatrix& ptdf,
                                                 const std::map<std::string, double>& injections) {
    Eigen::VectorXd inj = Eigen::VectorXd::Zero(static_cast<int>(ptdf.zone_order.size()));
    for (const auto& [id, mw] : injections) {
        bool known = false;
        for (std::size_t z = 0; z < ptdf.zone_order.size(); ++z) {
            if (ptdf.zone_order[z] == id) {
                inj(static_cast<int>(z)) = mw;
                known = true;
                break;
            }
        }
        if (!known) throw InputError("injection references unknown zone '" + id + "'");
    }
    const double total = inj.sum();
    if (std::abs(total) > tol::feasibility)
        throw BalanceError("injections sum to " + std::to_string(total) + ", expected 0");

    Eigen::VectorXd flows = -ptdf.table.transpose() * inj;
    return std::vector<double>(flows.data(), flows.data() + flows.size());
}

} // namespace coalloc
