#include "grn/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "csv.hpp"
#include "format.hpp"
#include "grn/errors.hpp"

namespace grn {

namespace {

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
        out += out.empty() ? s : "," + s;
    }
    return out;
}

std::string bool_string(bool b) { return b ? "true" : "false"; }

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw DomainError("expected a boolean, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& v) {
    T out{};
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw DomainError("expected a number, got '" + v + "'");
    }
    return out;
}

std::string alias_string(const AliasMap& aliases) {
    std::string out;
    for (const auto& [from, to] : aliases) {
        out += (out.empty() ? "" : ",") + from + "=" + to;
    }
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"data.dataset", [](RunConfig& c, const std::string& v) { c.dataset = v; }},
        {"data.samples",
         [](RunConfig& c, const std::string& v) {
             c.samples.clear();
             for (const auto& s : detail::split_fields(v)) {
                 if (!s.empty()) {
                     c.samples.push_back(s);
                 }
             }
         }},
        {"data.dropout", [](RunConfig& c, const std::string& v) { c.dropout = v; }},
        {"data.network", [](RunConfig& c, const std::string& v) { c.network = v; }},
        {"data.aliases", [](RunConfig& c, const std::string& v) { c.aliases = parse_aliases(v); }},
        {"data.min_weight", [](RunConfig& c, const std::string& v) { c.min_weight = parse_number<double>(v); }},
        {"metrics.convention", [](RunConfig& c, const std::string& v) { c.convention = parse_convention(v); }},
        {"model.features", [](RunConfig& c, const std::string& v) { c.features = parse_feature_mode(v); }},
        {"model.scoring", [](RunConfig& c, const std::string& v) { c.model.scoring = parse_scoring(v); }},
        {"model.hidden", [](RunConfig& c, const std::string& v) { c.model.hidden = parse_number<std::size_t>(v); }},
        {"model.heads", [](RunConfig& c, const std::string& v) { c.model.heads = parse_number<std::size_t>(v); }},
        {"model.embedding",
         [](RunConfig& c, const std::string& v) { c.model.embedding = parse_number<std::size_t>(v); }},
        {"model.out_heads",
         [](RunConfig& c, const std::string& v) { c.model.out_heads = parse_number<std::size_t>(v); }},
        {"model.negative_slope",
         [](RunConfig& c, const std::string& v) { c.model.negative_slope = parse_number<double>(v); }},
        {"model.symmetrize", [](RunConfig& c, const std::string& v) { c.model.symmetrize = parse_bool(v); }},
        {"train.seeds", [](RunConfig& c, const std::string& v) { c.seeds = parse_number<std::size_t>(v); }},
        {"train.epochs", [](RunConfig& c, const std::string& v) { c.epochs = parse_number<std::size_t>(v); }},
        {"train.lr", [](RunConfig& c, const std::string& v) { c.lr = parse_number<double>(v); }},
        {"train.train_ratio", [](RunConfig& c, const std::string& v) { c.ratios.train = parse_number<double>(v); }},
        {"train.val_ratio", [](RunConfig& c, const std::string& v) { c.ratios.val = parse_number<double>(v); }},
        {"train.test_ratio", [](RunConfig& c, const std::string& v) { c.ratios.test = parse_number<double>(v); }},
        {"train.neg_per_pos",
         [](RunConfig& c, const std::string& v) { c.neg_per_pos = parse_number<std::size_t>(v); }},
        {"train.threshold", [](RunConfig& c, const std::string& v) { c.threshold = parse_number<double>(v); }},
        {"train.patience", [](RunConfig& c, const std::string& v) { c.patience = parse_number<std::size_t>(v); }},
        {"train.pool", [](RunConfig& c, const std::string& v) { c.pool = parse_bool(v); }},
        {"train.workers", [](RunConfig& c, const std::string& v) { c.workers = parse_number<std::size_t>(v); }},
        {"importance.layer", [](RunConfig& c, const std::string& v) { c.layer = parse_number<int>(v); }},
        {"importance.untrained", [](RunConfig& c, const std::string& v) { c.untrained = parse_bool(v); }},
        {"importance.focus", [](RunConfig& c, const std::string& v) { c.focus = v; }},
        {"run.seed", [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>(v); }},
        {"run.out", [](RunConfig& c, const std::string& v) { c.out = v; }},
    };
    return table;
}

} // namespace

AliasMap parse_aliases(std::string_view text) {
    AliasMap out;
    for (const auto& item : detail::split_fields(text)) {
        if (item.empty()) {
            continue;
        }
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
            throw DomainError("alias '" + item + "' is not of the form name=canonical");
        }
        out[std::string(detail::trim(std::string_view(item).substr(0, eq)))] =
            std::string(detail::trim(std::string_view(item).substr(eq + 1)));
    }
    return out;
}

TrainConfig RunConfig::train_config(std::uint64_t run_seed) const {
    TrainConfig t;
    t.epochs = epochs;
    t.lr = lr;
    t.seed = run_seed;
    t.ratios = ratios;
    t.neg_per_pos = neg_per_pos;
    t.threshold = threshold;
    t.patience = patience;
    t.model = model;
    return t;
}

void RunConfig::validate() const {
    if (dropout != "none" && dropout != "50" && dropout != "70") {
        throw DomainError("dropout must be none, 50 or 70, got '" + dropout + "'");
    }
    if (seeds < 1) {
        throw DomainError("seeds must be at least 1");
    }
    if (layer < -1 || layer > 1) {
        throw DomainError("importance layer must be -1 (all), 0 or 1");
    }
    if (model.hidden < 1 || model.heads < 1 || model.embedding < 1 || model.out_heads < 1) {
        throw DomainError("model dimensions must be positive");
    }
    train_config(seed).validate();
}

std::string to_ini(const RunConfig& c) {
    std::ostringstream out;
    out << "[data]\n"
        << "dataset = " << c.dataset << "\n"
        << "samples = " << join(c.samples) << "\n"
        << "dropout = " << c.dropout << "\n"
        << "network = " << c.network << "\n"
        << "aliases = " << alias_string(c.aliases) << "\n"
        << "min_weight = " << detail::format_double(c.min_weight) << "\n\n"
        << "[metrics]\n"
        << "convention = " << to_string(c.convention) << "\n\n"
        << "[model]\n"
        << "features = " << to_string(c.features) << "\n"
        << "scoring = " << to_string(c.model.scoring) << "\n"
        << "hidden = " << c.model.hidden << "\n"
        << "heads = " << c.model.heads << "\n"
        << "embedding = " << c.model.embedding << "\n"
        << "out_heads = " << c.model.out_heads << "\n"
        << "negative_slope = " << detail::format_double(c.model.negative_slope) << "\n"
        << "symmetrize = " << bool_string(c.model.symmetrize) << "\n\n"
        << "[train]\n"
        << "seeds = " << c.seeds << "\n"
        << "epochs = " << c.epochs << "\n"
        << "lr = " << detail::format_double(c.lr) << "\n"
        << "train_ratio = " << detail::format_double(c.ratios.train) << "\n"
        << "val_ratio = " << detail::format_double(c.ratios.val) << "\n"
        << "test_ratio = " << detail::format_double(c.ratios.test) << "\n"
        << "neg_per_pos = " << c.neg_per_pos << "\n"
        << "threshold = " << detail::format_double(c.threshold) << "\n"
        << "patience = " << c.patience << "\n"
        << "pool = " << bool_string(c.pool) << "\n"
        << "workers = " << c.workers << "\n\n"
        << "[importance]\n"
        << "layer = " << c.layer << "\n"
        << "untrained = " << bool_string(c.untrained) << "\n"
        << "focus = " << c.focus << "\n\n"
        << "[run]\n"
        << "seed = " << c.seed << "\n"
        << "out = " << c.out << "\n";
    return out.str();
}

RunConfig from_ini(std::string_view text) {
    RunConfig config;
    std::istringstream in{std::string(text)};
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (detail::read_line(in, line)) {
        ++line_no;
        const auto stripped = detail::trim(line);
        if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') {
            continue;
        }
        if (stripped.front() == '[') {
            if (stripped.back() != ']') {
                throw ParseError("unterminated section header", line_no);
            }
            section = std::string(detail::trim(stripped.substr(1, stripped.size() - 2)));
            continue;
        }
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ParseError("expected 'key = value'", line_no);
        }
        const auto key = section + "." + std::string(detail::trim(stripped.substr(0, eq)));
        const auto value = std::string(detail::trim(stripped.substr(eq + 1)));
        const auto it = setters().find(key);
        if (it == setters().end()) {
            throw ParseError("unknown config key '" + key + "'", line_no);
        }
        try {
            it->second(config, value);
        } catch (const Error& e) {
            throw ParseError(std::string(e.what()) + " for '" + key + "'", line_no);
        }
    }
    return config;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ResolutionError("cannot open config file " + path);
    }
    std::ostringstream text;
    text << in.rdbuf();
    return from_ini(text.str());
}

} // namespace grn
