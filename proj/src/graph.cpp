#include "grn/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

#include "csv.hpp"
#include "grn/errors.hpp"
#include "grn/rng.hpp"

namespace grn {

namespace {

const std::string& resolve(const AliasMap& aliases, const std::string& name) {
    const auto it = aliases.find(name);
    return it == aliases.end() ? name : it->second;
}

std::string dot_quote(const std::string& s) {
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"' || c == '\\') {
            out += '\\';
        }
        out += c;
    }
    out += '"';
    return out;
}

std::string format_weight(double w) {
    std::ostringstream os;
    if (w == std::floor(w) && std::abs(w) < 1e15) {
        os << static_cast<long long>(w);
    } else {
        os << w;
    }
    return os.str();
}

/// Edge indices ordered by (source name, target name).
std::vector<std::size_t> name_order(const RegulatoryNetwork& net) {
    std::vector<std::size_t> order(net.edges().size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    const auto& edges = net.edges();
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(net.name(edges[a].source), net.name(edges[a].target)) <
               std::tie(net.name(edges[b].source), net.name(edges[b].target));
    });
    return order;
}

} // namespace

RegulatoryNetwork::RegulatoryNetwork(std::vector<std::string> genes, std::vector<RegEdge> edges, std::string label)
    : edges_(std::move(edges)), label_(std::move(label)) {
    genes_.reserve(genes.size());
    for (std::size_t i = 0; i < genes.size(); ++i) {
        if (!lookup_.emplace(genes[i], i).second) {
            throw DomainError("duplicate gene name '" + genes[i] + "'");
        }
        genes_.push_back(Gene{std::move(genes[i]), i});
    }

    for (const auto& e : edges_) {
        if (e.source >= genes_.size() || e.target >= genes_.size()) {
            throw IndexError("edge endpoint outside the gene universe");
        }
        if (e.sign != 1 && e.sign != -1) {
            throw DomainError("edge sign must be +1 or -1");
        }
    }
    std::sort(edges_.begin(), edges_.end(), [](const RegEdge& a, const RegEdge& b) {
        return std::tie(a.source, a.target) < std::tie(b.source, b.target);
    });
    for (std::size_t i = 1; i < edges_.size(); ++i) {
        if (edges_[i].source == edges_[i - 1].source && edges_[i].target == edges_[i - 1].target) {
            throw ConflictError("duplicate edge (" + genes_[edges_[i].source].name + "," +
                                genes_[edges_[i].target].name + ")");
        }
    }
}

std::optional<std::size_t> RegulatoryNetwork::find(std::string_view name) const {
    const auto it = lookup_.find(std::string(name));
    if (it == lookup_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::size_t RegulatoryNetwork::index_of(std::string_view name) const {
    const auto found = find(name);
    if (!found) {
        throw CoverageError("gene '" + std::string(name) + "' is not in network '" + label_ + "'");
    }
    return *found;
}

const RegEdge* RegulatoryNetwork::edge(std::size_t source, std::size_t target) const {
    const auto it = std::lower_bound(edges_.begin(), edges_.end(), std::make_pair(source, target),
                                     [](const RegEdge& e, const std::pair<std::size_t, std::size_t>& key) {
                                         return std::tie(e.source, e.target) < std::tie(key.first, key.second);
                                     });
    if (it == edges_.end() || it->source != source || it->target != target) {
        return nullptr;
    }
    return &*it;
}

std::vector<std::string> RegulatoryNetwork::gene_names() const {
    std::vector<std::string> names;
    names.reserve(genes_.size());
    for (const auto& g : genes_) {
        names.push_back(g.name);
    }
    return names;
}

RegulatoryNetwork RegulatoryNetwork::filtered(double min_abs_weight) const {
    std::vector<RegEdge> kept;
    for (const auto& e : edges_) {
        if (std::abs(e.weight) >= min_abs_weight) {
            kept.push_back(e);
        }
    }
    return RegulatoryNetwork(gene_names(), std::move(kept), label_);
}

RegulatoryNetwork RegulatoryNetwork::with_label(std::string label) const {
    return RegulatoryNetwork(gene_names(), edges_, std::move(label));
}

RegulatoryNetwork RegulatoryNetwork::reordered(std::span<const std::size_t> order) const {
    if (order.size() != genes_.size()) {
        throw DomainError("reorder permutation has the wrong length");
    }
    std::vector<std::size_t> new_index(genes_.size(), genes_.size());
    std::vector<std::string> names;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (order[i] >= genes_.size() || new_index[order[i]] != genes_.size()) {
            throw DomainError("reorder argument is not a permutation");
        }
        new_index[order[i]] = i;
        names.push_back(genes_[order[i]].name);
    }
    std::vector<RegEdge> edges;
    for (auto e : edges_) {
        e.source = new_index[e.source];
        e.target = new_index[e.target];
        edges.push_back(e);
    }
    return RegulatoryNetwork(std::move(names), std::move(edges), label_);
}

ExpressionMatrix::ExpressionMatrix(std::vector<std::string> genes, std::vector<std::string> cells,
                                   std::vector<double> values, std::optional<int> dropout_q)
    : genes_(std::move(genes)), cells_(std::move(cells)), values_(std::move(values)), dropout_q_(dropout_q) {
    if (values_.size() != genes_.size() * cells_.size()) {
        throw ShapeError("expression values do not match " + std::to_string(genes_.size()) + " x " +
                         std::to_string(cells_.size()));
    }
    for (const double v : values_) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw DomainError("expression values must be finite and non-negative");
        }
    }
    for (std::size_t i = 0; i < genes_.size(); ++i) {
        if (!lookup_.emplace(genes_[i], i).second) {
            throw DomainError("duplicate gene row '" + genes_[i] + "'");
        }
    }
}

std::optional<std::size_t> ExpressionMatrix::find(std::string_view gene) const {
    const auto it = lookup_.find(std::string(gene));
    if (it == lookup_.end()) {
        return std::nullopt;
    }
    return it->second;
}

RegulatoryNetwork parse_ref_network(std::istream& in, std::string label, const AliasMap& aliases) {
    std::string line;
    std::size_t line_no = 0;
    bool seen_header = false;

    std::vector<std::string> names;
    std::unordered_map<std::string, std::size_t> index;
    std::map<std::pair<std::size_t, std::size_t>, int> signs;

    auto intern = [&](const std::string& raw) {
        const std::string& name = resolve(aliases, raw);
        const auto [it, inserted] = index.emplace(name, names.size());
        if (inserted) {
            names.push_back(name);
        }
        return it->second;
    };

    while (detail::read_line(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto fields = detail::split_fields(line);
        if (!seen_header) {
            if (fields.size() != 3 || fields[0] != "Gene1" || fields[1] != "Gene2" || fields[2] != "Type") {
                throw ParseError("expected header 'Gene1,Gene2,Type'", line_no);
            }
            seen_header = true;
            continue;
        }
        if (fields.size() != 3) {
            throw ParseError("expected 3 fields, found " + std::to_string(fields.size()), line_no);
        }
        if (fields[0].empty() || fields[1].empty()) {
            throw ParseError("empty gene name", line_no);
        }
        int sign = 0;
        if (fields[2] == "+") {
            sign = 1;
        } else if (fields[2] == "-") {
            sign = -1;
        } else {
            throw ParseError("Type must be '+' or '-', found '" + fields[2] + "'", line_no);
        }

        const auto s = intern(fields[0]);
        const auto t = intern(fields[1]);
        const auto [it, inserted] = signs.emplace(std::make_pair(s, t), sign);
        if (!inserted && it->second != sign) {
            throw ConflictError("conflicting signs for edge (" + names[s] + "," + names[t] + ")");
        }
    }
    if (!seen_header) {
        throw ParseError("missing header 'Gene1,Gene2,Type'", line_no);
    }

    std::vector<RegEdge> edges;
    edges.reserve(signs.size());
    for (const auto& [pair, sign] : signs) {
        edges.push_back(RegEdge{pair.first, pair.second, sign, static_cast<double>(sign)});
    }
    return RegulatoryNetwork(std::move(names), std::move(edges), std::move(label));
}

RegulatoryNetwork parse_ref_network(std::string_view text, std::string label, const AliasMap& aliases) {
    std::istringstream in{std::string(text)};
    return parse_ref_network(in, std::move(label), aliases);
}

ExpressionMatrix parse_expression(std::istream& in, const AliasMap& aliases) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> cells;
    std::vector<std::string> genes;
    std::vector<double> values;
    bool seen_header = false;

    while (detail::read_line(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        auto fields = detail::split_fields(line);
        if (!seen_header) {
            if (!fields[0].empty() && fields[0] != "Gene") {
                throw ParseError("first header cell must be empty or 'Gene'", line_no);
            }
            cells.assign(fields.begin() + 1, fields.end());
            seen_header = true;
            continue;
        }
        if (fields.size() != cells.size() + 1) {
            throw ParseError("ragged row: expected " + std::to_string(cells.size()) + " values, found " +
                                 std::to_string(fields.size() - 1),
                             line_no);
        }
        genes.push_back(resolve(aliases, fields[0]));
        for (std::size_t c = 1; c < fields.size(); ++c) {
            const auto& f = fields[c];
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || ptr != f.data() + f.size() || f.empty() || !std::isfinite(v)) {
                throw ParseError("non-numeric value '" + f + "' at row " + std::to_string(genes.size()) +
                                     ", column " + std::to_string(c),
                                 line_no);
            }
            if (v < 0.0) {
                throw DomainError("negative expression value " + f + " at line " + std::to_string(line_no) +
                                  ", column " + std::to_string(c));
            }
            values.push_back(v);
        }
    }
    if (!seen_header) {
        throw ParseError("missing header row", line_no);
    }
    return ExpressionMatrix(std::move(genes), std::move(cells), std::move(values));
}

ExpressionMatrix parse_expression(std::string_view text, const AliasMap& aliases) {
    std::istringstream in{std::string(text)};
    return parse_expression(in, aliases);
}

std::string to_ref_csv(const RegulatoryNetwork& net) {
    std::string out = "Gene1,Gene2,Type\n";
    for (const auto& e : net.edges()) {
        out += net.name(e.source) + "," + net.name(e.target) + "," + (e.sign > 0 ? "+" : "-") + "\n";
    }
    return out;
}

RegulatoryNetwork aggregate(std::span<const RegulatoryNetwork> samples, std::string label) {
    if (samples.empty()) {
        throw DomainError("aggregate needs at least one sample");
    }

    const auto& first = samples.front();
    const auto first_names = first.gene_names();
    const std::set<std::string> universe(first_names.begin(), first_names.end());
    bool same_order = true;
    for (const auto& s : samples) {
        const auto names = s.gene_names();
        const std::set<std::string> other(names.begin(), names.end());
        if (other != universe) {
            std::vector<std::string> diff;
            std::set_symmetric_difference(universe.begin(), universe.end(), other.begin(), other.end(),
                                          std::back_inserter(diff));
            std::string listed;
            for (const auto& d : diff) {
                listed += (listed.empty() ? "" : ", ") + d;
            }
            throw UniverseError("sample '" + s.label() + "' has a different gene universe than '" + first.label() +
                                "'; symmetric difference: " + listed);
        }
        same_order = same_order && names == first_names;
    }

    // Canonical universe order must not depend on sample order.
    const std::vector<std::string> names =
        same_order ? first_names : std::vector<std::string>(universe.begin(), universe.end());
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < names.size(); ++i) {
        index.emplace(names[i], i);
    }

    std::map<std::pair<std::size_t, std::size_t>, long long> sums;
    for (const auto& s : samples) {
        for (const auto& e : s.edges()) {
            const auto key = std::make_pair(index.at(s.name(e.source)), index.at(s.name(e.target)));
            sums[key] += e.sign;
        }
    }

    std::vector<RegEdge> edges;
    edges.reserve(sums.size());
    for (const auto& [pair, sum] : sums) {
        edges.push_back(RegEdge{pair.first, pair.second, sum < 0 ? -1 : 1, static_cast<double>(sum)});
    }
    return RegulatoryNetwork(names, std::move(edges), std::move(label));
}

ExpressionMatrix inject_dropout(const ExpressionMatrix& m, int q, std::uint64_t seed) {
    if (q < 0 || q > 100) {
        throw DomainError("dropout rate must be within [0, 100], got " + std::to_string(q));
    }
    const double p = q / 100.0;
    Rng rng(seed);
    std::vector<double> values = m.values();
    for (auto& v : values) {
        if (rng.uniform() < p) {
            v = 0.0;
        }
    }
    return ExpressionMatrix(m.genes(), m.cells(), std::move(values), q);
}

std::string to_dot(const RegulatoryNetwork& net) {
    std::ostringstream os;
    os << "digraph " << dot_quote(net.label().empty() ? "grn" : net.label()) << " {\n";
    os << "  node [shape=box];\n";
    for (const auto& g : net.genes()) {
        os << "  " << dot_quote(g.name) << ";\n";
    }
    for (const auto i : name_order(net)) {
        const auto& e = net.edges()[i];
        const bool repression = e.sign < 0;
        const double width = std::max(1.0, std::abs(e.weight));
        os << "  " << dot_quote(net.name(e.source)) << " -> " << dot_quote(net.name(e.target)) << " [";
        os << "label=\"" << format_weight(e.weight) << "\", ";
        os << "color=" << (repression ? "red" : "blue") << ", ";
        os << "arrowhead=" << (repression ? "tee" : "normal") << ", ";
        os << "penwidth=" << format_weight(width);
        if (e.weight == 0.0) {
            os << ", style=dashed";
        }
        os << "];\n";
    }
    os << "}\n";
    return os.str();
}

nlohmann::json to_json(const RegulatoryNetwork& net) {
    nlohmann::json doc;
    doc["label"] = net.label();
    doc["genes"] = net.gene_names();
    auto edges = nlohmann::json::array();
    for (const auto i : name_order(net)) {
        const auto& e = net.edges()[i];
        edges.push_back({{"source", net.name(e.source)},
                         {"target", net.name(e.target)},
                         {"sign", e.sign},
                         {"weight", e.weight}});
    }
    doc["edges"] = std::move(edges);
    return doc;
}

RegulatoryNetwork from_json(const nlohmann::json& doc) {
    try {
        auto genes = doc.at("genes").get<std::vector<std::string>>();
        std::unordered_map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < genes.size(); ++i) {
            index.emplace(genes[i], i);
        }
        auto lookup = [&](const std::string& name) {
            const auto it = index.find(name);
            if (it == index.end()) {
                throw CoverageError("edge endpoint '" + name + "' is not listed in genes");
            }
            return it->second;
        };
        std::vector<RegEdge> edges;
        for (const auto& e : doc.at("edges")) {
            edges.push_back(RegEdge{lookup(e.at("source").get<std::string>()),
                                    lookup(e.at("target").get<std::string>()), e.at("sign").get<int>(),
                                    e.at("weight").get<double>()});
        }
        return RegulatoryNetwork(std::move(genes), std::move(edges), doc.value("label", std::string{}));
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("malformed network JSON: ") + ex.what(), 0);
    }
}

} // namespace grn
