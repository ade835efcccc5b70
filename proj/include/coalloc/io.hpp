#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "coalloc/pricing.hpp"
#include "coalloc/robustness.hpp"
#include "coalloc/settlement.hpp"

namespace coalloc {

// Shortest exact rendering would be nicer to read, but %.17g guarantees
// strtod round-trips bit-identically, which the result files rely on.
inline std::string format_number(double v) {
    if (v == lp::inf) return "inf";
    if (v == -lp::inf) return "-inf";
    if (v == 0.0) v = 0.0;  // normalize -0
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Instance {
    Topology topology;
    BidBook book;
    // Externally pinned settled prices, per clearing mode.
    std::map<ClearingMode, std::map<std::pair<Product, std::string>, double>> price_overrides;
    // Reference per-bid surplus values to compare settlements against.
    std::map<ClearingMode, std::map<std::string, double>> reference_surplus;

    bool has_overrides(ClearingMode m) const {
        auto it = price_overrides.find(m);
        return it != price_overrides.end() && !it->second.empty();
    }
    // Derived sheet with the mode's overrides pinned on top.
    PriceSheet overridden(PriceSheet sheet) const {
        auto it = price_overrides.find(sheet.mode);
        if (it != price_overrides.end())
            for (const auto& [key, v] : it->second)
                sheet.override_price(key.first, key.second, v);
        return sheet;
    }
};

namespace detail {

struct Token {
    std::string text;
    int col = 0; // 1-based character column
};

inline std::vector<Token> tokenize_line(const std::string& line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        if (line[i] == '#') break;
        if (std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) &&
               line[i] != '#')
            ++i;
        out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
    }
    return out;
}

[[noreturn]] inline void parse_fail(const std::string& name, int lineno, int col,
                                    const std::string& msg) {
    throw InputError(name + ":" + std::to_string(lineno) + ":" + std::to_string(col) +
                     ": " + msg);
}

inline double parse_number(const std::string& name, int lineno, const Token& t) {
    if (t.text == "inf") return lp::inf;
    if (t.text == "-inf") return -lp::inf;
    const char* s = t.text.c_str();
    char* end = nullptr;
    const double v = std::strtod(s, &end);
    if (end == s || *end != '\0')
        parse_fail(name, lineno, t.col, "expected a number, got '" + t.text + "'");
    return v;
}

inline long long parse_integer(const std::string& name, int lineno, const Token& t) {
    const char* s = t.text.c_str();
    char* end = nullptr;
    const long long v = std::strtoll(s, &end, 10);
    if (end == s || *end != '\0')
        parse_fail(name, lineno, t.col, "expected an integer, got '" + t.text + "'");
    return v;
}

inline void check_identifier(const std::string& name, int lineno, const Token& t) {
    for (char c : t.text)
        if (c == ',' || c == ';' || c == ':')
            parse_fail(name, lineno, t.col,
                       "identifier '" + t.text + "' contains a reserved character");
}

} // namespace detail

inline Instance parse_instance(const std::string& text,
                               const std::string& name = "<input>") {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool header = false;

    std::vector<std::string> zones;
    std::vector<Line> lines;
    std::optional<std::string> slack;
    std::vector<Bid> bids;
    Instance inst;

    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto toks = detail::tokenize_line(line);
        if (toks.empty()) continue;
        if (!header) {
            if (toks.size() != 2 || toks[0].text != "coalloc-instance" ||
                toks[1].text != "v1")
                detail::parse_fail(name, lineno, toks[0].col,
                                   "expected header 'coalloc-instance v1'");
            header = true;
            continue;
        }
        const std::string& key = toks[0].text;
        const auto want = [&](std::size_t n, const char* usage) {
            if (toks.size() != n + 1)
                detail::parse_fail(name, lineno, toks[0].col,
                                   std::string("usage: ") + usage);
        };
        if (key == "zone") {
            want(1, "zone <id>");
            detail::check_identifier(name, lineno, toks[1]);
            zones.push_back(toks[1].text);
        } else if (key == "slack") {
            want(1, "slack <zone>");
            if (slack)
                detail::parse_fail(name, lineno, toks[0].col, "duplicate slack directive");
            slack = toks[1].text;
        } else if (key == "line") {
            want(5, "line <id> <from> <to> <susceptance> <capacity>");
            Line l;
            l.id = detail::parse_integer(name, lineno, toks[1]);
            l.from = toks[2].text;
            l.to = toks[3].text;
            l.susceptance = detail::parse_number(name, lineno, toks[4]);
            l.capacity = detail::parse_number(name, lineno, toks[5]);
            lines.push_back(std::move(l));
        } else if (key == "bid") {
            want(5, "bid <id> <product> <zone> <quantity> <price>");
            detail::check_identifier(name, lineno, toks[1]);
            Bid b;
            b.id = toks[1].text;
            try {
                b.product = parse_product(toks[2].text);
            } catch (const Error& e) {
                detail::parse_fail(name, lineno, toks[2].col, e.what());
            }
            b.zone = toks[3].text;
            b.quantity = detail::parse_number(name, lineno, toks[4]);
            b.price = detail::parse_number(name, lineno, toks[5]);
            bids.push_back(std::move(b));
        } else if (key == "price") {
            want(4, "price <mode> <product> <zone> <value>");
            ClearingMode m;
            Product p;
            try {
                m = parse_mode(toks[1].text);
            } catch (const Error& e) {
                detail::parse_fail(name, lineno, toks[1].col, e.what());
            }
            try {
                p = parse_product(toks[2].text);
            } catch (const Error& e) {
                detail::parse_fail(name, lineno, toks[2].col, e.what());
            }
            const double v = detail::parse_number(name, lineno, toks[4]);
            if (!inst.price_overrides[m].emplace(std::make_pair(p, toks[3].text), v).second)
                detail::parse_fail(name, lineno, toks[3].col, "duplicate price override");
        } else if (key == "expect_surplus") {
            want(3, "expect_surplus <mode> <bid> <value>");
            ClearingMode m;
            try {
                m = parse_mode(toks[1].text);
            } catch (const Error& e) {
                detail::parse_fail(name, lineno, toks[1].col, e.what());
            }
            const double v = detail::parse_number(name, lineno, toks[3]);
            if (!inst.reference_surplus[m].emplace(toks[2].text, v).second)
                detail::parse_fail(name, lineno, toks[2].col, "duplicate expect_surplus");
        } else {
            detail::parse_fail(name, lineno, toks[0].col, "unknown directive '" + key + "'");
        }
    }
    if (!header) throw InputError(name + ": empty file, expected 'coalloc-instance v1'");
    if (!slack) throw InputError(name + ": missing slack directive");

    try {
        inst.topology = make_topology(zones, lines, *slack);
    } catch (const Error& e) {
        throw InputError(name + ": " + e.what());
    }
    inst.book.bids = std::move(bids);
    const auto issues = validate(inst.book, inst.topology);
    if (!issues.empty()) {
        std::string msg = name + ": invalid bids:";
        for (const auto& s : issues) msg += " " + s + ";";
        throw InputError(msg);
    }
    for (const auto& [m, refs] : inst.reference_surplus)
        for (const auto& [bid, v] : refs)
            if (inst.book.index_of_id(bid) < 0)
                throw InputError(name + ": expect_surplus references unknown bid '" + bid +
                                 "'");
    return inst;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << content;
    if (!out) throw InputError("write failed for '" + path + "'");
}

inline Instance load_instance(const std::string& path) {
    return parse_instance(read_file(path), path);
}

// Everything one clearing run produces, in file-round-trippable form.
struct ResultsDoc {
    ClearingMode mode = ClearingMode::Decoupled;
    double tsw = 0.0;
    std::vector<std::pair<std::string, double>> acceptance; // bid id, x
    std::map<Product, std::map<std::string, double>> positions;
    std::vector<std::pair<long long, double>> base_flows; // line id, flow
    PriceSheet prices;
    std::optional<WorstCaseReport> worst_off, worst_on;
    std::vector<ActivationVertex> vertices;
    std::vector<RecoursePlan> committed;

    std::vector<double> acceptance_for(const BidBook& book) const {
        std::vector<double> x(book.bids.size(), 0.0);
        std::vector<bool> seen(book.bids.size(), false);
        for (const auto& [id, v] : acceptance) {
            const int at = book.index_of_id(id);
            if (at < 0) throw InputError("results reference unknown bid '" + id + "'");
            x[static_cast<std::size_t>(at)] = v;
            seen[static_cast<std::size_t>(at)] = true;
        }
        for (std::size_t i = 0; i < seen.size(); ++i)
            if (!seen[i])
                throw InputError("results lack acceptance for bid '" + book.bids[i].id +
                                 "'");
        return x;
    }
};

inline ResultsDoc make_results_doc(const BidBook& book, const Topology& topo,
                                   const ClearingOutcome& outcome, PriceSheet prices,
                                   std::optional<WorstCaseReport> worst_off = {},
                                   std::optional<WorstCaseReport> worst_on = {}) {
    ResultsDoc doc;
    doc.mode = outcome.mode;
    doc.tsw = outcome.tsw;
    for (std::size_t i = 0; i < book.bids.size(); ++i)
        doc.acceptance.push_back({book.bids[i].id, outcome.acceptance[i]});
    doc.positions = outcome.positions;
    for (std::size_t j = 0; j < outcome.base_flows.size(); ++j)
        doc.base_flows.push_back({topo.lines[j].id, outcome.base_flows[j]});
    doc.prices = std::move(prices);
    doc.worst_off = std::move(worst_off);
    doc.worst_on = std::move(worst_on);
    doc.vertices = outcome.vertices;
    doc.committed = outcome.committed;
    return doc;
}

namespace detail {

inline std::string plan_to_string(const RecoursePlan& plan) {
    std::string out;
    for (const auto& [z, a] : plan.activate_pos) {
        if (!out.empty()) out += ";";
        out += "+" + z + ":" + format_number(a);
    }
    for (const auto& [z, a] : plan.activate_neg) {
        if (!out.empty()) out += ";";
        out += "-" + z + ":" + format_number(a);
    }
    return out.empty() ? "none" : out;
}

inline RecoursePlan plan_from_string(const std::string& s) {
    RecoursePlan plan;
    if (s == "none" || s.empty()) return plan;
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t j = s.find(';', i);
        if (j == std::string::npos) j = s.size();
        const std::string item = s.substr(i, j - i);
        const std::size_t colon = item.find(':');
        if (item.size() < 4 || (item[0] != '+' && item[0] != '-') ||
            colon == std::string::npos)
            throw InputError("malformed recourse entry '" + item + "'");
        const std::string zone = item.substr(1, colon - 1);
        const double a = std::strtod(item.c_str() + colon + 1, nullptr);
        if (item[0] == '+')
            plan.activate_pos[zone] = a;
        else
            plan.activate_neg[zone] = a;
        i = j + 1;
    }
    return plan;
}

inline void append_worst_section(std::string& out, const char* section,
                                 const WorstCaseReport& rep) {
    out += std::string("section,") + section + "\n";
    out += "line,direction,capacity,load,vertex,plan\n";
    for (const WorstCaseEntry& e : rep.entries) {
        out += std::to_string(e.line_id) + "," + (e.direction > 0 ? "+" : "-") + "," +
               format_number(e.capacity) + "," + format_number(e.load) + "," +
               std::to_string(e.vertex_id) + "," + plan_to_string(e.plan) + "\n";
    }
}

} // namespace detail

inline std::string results_to_csv(const ResultsDoc& doc) {
    std::string out = "coalloc-results,v1\n";
    out += "section,meta\nkey,value\n";
    out += std::string("mode,") + mode_name(doc.mode) + "\n";
    out += "tsw," + format_number(doc.tsw) + "\n";
    out += std::string("provenance,") +
           (doc.prices.provenance == PriceProvenance::External ? "external" : "derived") +
           "\n";
    out += "vertex_count," + std::to_string(doc.vertices.size()) + "\n";

    out += "section,acceptance\nbid,x\n";
    for (const auto& [id, x] : doc.acceptance) out += id + "," + format_number(x) + "\n";

    out += "section,position\nproduct,zone,position\n";
    for (const auto& [p, zones] : doc.positions)
        for (const auto& [z, v] : zones)
            out += std::string(product_code(p)) + "," + z + "," + format_number(v) + "\n";

    out += "section,base_flow\nline,flow\n";
    for (const auto& [id, f] : doc.base_flows)
        out += std::to_string(id) + "," + format_number(f) + "\n";

    out += "section,price\nproduct,zone,lo,hi,settled\n";
    for (const auto& [key, iv] : doc.prices.entries) {
        out += std::string(product_code(key.first)) + "," + key.second + "," +
               format_number(iv.lo) + "," + format_number(iv.hi) + "," +
               (iv.settled ? format_number(*iv.settled) : std::string("")) + "\n";
    }

    if (doc.worst_off) detail::append_worst_section(out, "worst_off", *doc.worst_off);
    if (doc.worst_on) detail::append_worst_section(out, "worst_on", *doc.worst_on);

    out += "section,vertex\nvertex,zone,sign,r\n";
    for (const ActivationVertex& v : doc.vertices) {
        for (const auto& [z, r] : v.r_pos)
            out += std::to_string(v.id) + "," + z + ",+," + format_number(r) + "\n";
        for (const auto& [z, r] : v.r_neg)
            out += std::to_string(v.id) + "," + z + ",-," + format_number(r) + "\n";
    }

    out += "section,recourse\nvertex,zone,sign,amount\n";
    for (std::size_t v = 0; v < doc.committed.size(); ++v) {
        for (const auto& [z, a] : doc.committed[v].activate_pos)
            out += std::to_string(v) + "," + z + ",+," + format_number(a) + "\n";
        for (const auto& [z, a] : doc.committed[v].activate_neg)
            out += std::to_string(v) + "," + z + ",-," + format_number(a) + "\n";
    }
    return out;
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (true) {
        const std::size_t j = line.find(',', i);
        if (j == std::string::npos) {
            out.push_back(line.substr(i));
            return out;
        }
        out.push_back(line.substr(i, j - i));
        i = j + 1;
    }
}

inline double csv_number(const std::string& name, int lineno, const std::string& s) {
    return parse_number(name, lineno, Token{s, 1});
}

} // namespace detail

inline ResultsDoc parse_results(const std::string& text,
                                const std::string& name = "<input>") {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    ResultsDoc doc;
    std::string section;
    bool header = false, columns_pending = false;
    std::size_t vertex_count = 0;

    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = detail::split_csv(line);
        if (!header) {
            if (f.size() != 2 || f[0] != "coalloc-results" || f[1] != "v1")
                detail::parse_fail(name, lineno, 1, "expected header 'coalloc-results,v1'");
            header = true;
            continue;
        }
        if (f[0] == "section") {
            if (f.size() != 2) detail::parse_fail(name, lineno, 1, "malformed section row");
            section = f[1];
            columns_pending = true;
            continue;
        }
        if (columns_pending) {
            columns_pending = false; // column-name row, content fixed per section
            continue;
        }
        if (section == "meta") {
            if (f.size() != 2) detail::parse_fail(name, lineno, 1, "malformed meta row");
            if (f[0] == "mode")
                doc.mode = parse_mode(f[1]);
            else if (f[0] == "tsw")
                doc.tsw = detail::csv_number(name, lineno, f[1]);
            else if (f[0] == "provenance")
                doc.prices.provenance = f[1] == "external" ? PriceProvenance::External
                                                           : PriceProvenance::Derived;
            else if (f[0] == "vertex_count")
                vertex_count = static_cast<std::size_t>(
                    detail::parse_integer(name, lineno, detail::Token{f[1], 1}));
            else
                detail::parse_fail(name, lineno, 1, "unknown meta key '" + f[0] + "'");
        } else if (section == "acceptance") {
            if (f.size() != 2) detail::parse_fail(name, lineno, 1, "malformed acceptance row");
            doc.acceptance.push_back({f[0], detail::csv_number(name, lineno, f[1])});
        } else if (section == "position") {
            if (f.size() != 3) detail::parse_fail(name, lineno, 1, "malformed position row");
            doc.positions[parse_product(f[0])][f[1]] = detail::csv_number(name, lineno, f[2]);
        } else if (section == "base_flow") {
            if (f.size() != 2) detail::parse_fail(name, lineno, 1, "malformed base_flow row");
            doc.base_flows.push_back({detail::parse_integer(name, lineno, {f[0], 1}),
                                      detail::csv_number(name, lineno, f[1])});
        } else if (section == "price") {
            if (f.size() != 5) detail::parse_fail(name, lineno, 1, "malformed price row");
            PriceInterval iv;
            iv.lo = detail::csv_number(name, lineno, f[2]);
            iv.hi = detail::csv_number(name, lineno, f[3]);
            if (!f[4].empty()) iv.settled = detail::csv_number(name, lineno, f[4]);
            doc.prices.set(parse_product(f[0]), f[1], iv);
        } else if (section == "worst_off" || section == "worst_on") {
            if (f.size() != 6) detail::parse_fail(name, lineno, 1, "malformed worst row");
            auto& rep = section == "worst_off" ? doc.worst_off : doc.worst_on;
            if (!rep) {
                rep.emplace();
                rep->with_recourse = section == "worst_on";
            }
            WorstCaseEntry e;
            e.line_id = detail::parse_integer(name, lineno, {f[0], 1});
            e.direction = f[1] == "-" ? -1 : +1;
            e.capacity = detail::csv_number(name, lineno, f[2]);
            e.load = detail::csv_number(name, lineno, f[3]);
            e.vertex_id =
                static_cast<int>(detail::parse_integer(name, lineno, {f[4], 1}));
            try {
                e.plan = detail::plan_from_string(f[5]);
            } catch (const Error& err) {
                detail::parse_fail(name, lineno, 1, err.what());
            }
            rep->entries.push_back(std::move(e));
        } else if (section == "vertex") {
            if (f.size() != 4) detail::parse_fail(name, lineno, 1, "malformed vertex row");
            const std::size_t id = static_cast<std::size_t>(
                detail::parse_integer(name, lineno, {f[0], 1}));
            if (doc.vertices.size() < id + 1) doc.vertices.resize(id + 1);
            doc.vertices[id].id = static_cast<int>(id);
            if (f[2] == "+")
                doc.vertices[id].r_pos[f[1]] = detail::csv_number(name, lineno, f[3]);
            else
                doc.vertices[id].r_neg[f[1]] = detail::csv_number(name, lineno, f[3]);
        } else if (section == "recourse") {
            if (f.size() != 4) detail::parse_fail(name, lineno, 1, "malformed recourse row");
            const std::size_t id = static_cast<std::size_t>(
                detail::parse_integer(name, lineno, {f[0], 1}));
            if (doc.committed.size() < id + 1) doc.committed.resize(id + 1);
            if (f[2] == "+")
                doc.committed[id].activate_pos[f[1]] = detail::csv_number(name, lineno, f[3]);
            else
                doc.committed[id].activate_neg[f[1]] = detail::csv_number(name, lineno, f[3]);
        } else {
            detail::parse_fail(name, lineno, 1, "unknown section '" + section + "'");
        }
    }
    if (!header) throw InputError(name + ": empty file, expected 'coalloc-results,v1'");
    if (doc.vertices.size() < vertex_count) doc.vertices.resize(vertex_count);
    for (std::size_t v = 0; v < doc.vertices.size(); ++v)
        doc.vertices[v].id = static_cast<int>(v);
    if (doc.committed.size() < doc.vertices.size()) doc.committed.resize(doc.vertices.size());
    doc.prices.mode = doc.mode;
    return doc;
}

inline ResultsDoc load_results(const std::string& path) {
    return parse_results(read_file(path), path);
}

} // namespace coalloc
