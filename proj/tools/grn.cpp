// grn: aggregate, analyze and model gene regulatory networks.

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "grn/commands.hpp"
#include "grn/errors.hpp"

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> dataset;
    std::optional<std::string> network;
    std::optional<std::string> samples;
    std::optional<std::string> dropout;
    std::optional<std::string> aliases;
    std::optional<std::string> scoring;
    std::optional<std::string> features;
    std::optional<std::string> convention;
    std::optional<std::size_t> seeds;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> workers;
    std::optional<double> lr;
    std::optional<int> layer;
    bool directed = false;
    bool undirected = false;
    bool pool = false;
    bool symmetrize = false;
    bool untrained = false;
};

// Defaults, then the config file, then whatever was given on the command line.
grn::RunConfig build_config(const Overrides& o) {
    auto c = o.config.empty() ? grn::RunConfig{} : grn::load_run_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (o.out) c.out = *o.out;
    if (o.dataset) c.dataset = *o.dataset;
    if (o.network) c.network = *o.network;
    if (o.samples) c.samples = {*o.samples};
    if (o.dropout) c.dropout = *o.dropout;
    if (o.aliases) c.aliases = grn::parse_aliases(*o.aliases);
    if (o.scoring) c.model.scoring = grn::parse_scoring(*o.scoring);
    if (o.features) c.features = grn::parse_feature_mode(*o.features);
    if (o.convention) c.convention = grn::parse_convention(*o.convention);
    if (o.directed) c.convention = grn::Convention::Directed;
    if (o.undirected) c.convention = grn::Convention::UndirectedWithLoops;
    if (o.seeds) c.seeds = *o.seeds;
    if (o.epochs) c.epochs = *o.epochs;
    if (o.workers) c.workers = *o.workers;
    if (o.lr) c.lr = *o.lr;
    if (o.layer) c.layer = *o.layer;
    if (o.pool) c.pool = true;
    if (o.symmetrize) c.model.symmetrize = true;
    if (o.untrained) c.untrained = true;
    c.validate();
    return c;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gene regulatory network aggregation, centrality, and graph-attention link prediction"};
    app.require_subcommand(1);
    app.fallthrough();
    Overrides o;

    app.add_option("--config", o.config, "INI run config (flags override it)");
    app.add_option("--seed", o.seed, "master seed");
    app.add_option("--out", o.out, "output directory");
    auto* directed = app.add_flag("--directed", o.directed, "directed centrality convention");
    app.add_flag("--undirected", o.undirected, "undirected centrality convention, self-loops kept")
        ->excludes(directed);
    app.add_option("--convention", o.convention, "directed | undirected | undirected-simple");
    app.add_option("--scoring", o.scoring, "attention scoring: v1 | v2");
    app.add_option("--features", o.features, "node features: onehot | expr");
    app.add_option("--dataset", o.dataset, "directory of sample subdirectories");
    app.add_option("--network", o.network, "single refNetwork CSV");
    app.add_option("--samples", o.samples, "glob over sample directory names");
    app.add_option("--dropout", o.dropout, "none | 50 | 70");
    app.add_option("--aliases", o.aliases, "name=canonical[,name=canonical...]");

    std::map<std::string, CLI::App*> subs;
    subs["aggregate"] = app.add_subcommand("aggregate", "sum sample networks into one weighted network");
    subs["metrics"] = app.add_subcommand("metrics", "centrality table for the (aggregated) network");
    subs["train"] = app.add_subcommand("train", "train one GAT link predictor per (sample, seed)");
    subs["evaluate"] = app.add_subcommand("evaluate", "re-score test edges from saved checkpoints");
    subs["importance"] = app.add_subcommand("importance", "attention-based gene importance and its stability");
    subs["gradcheck"] = app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");
    subs["export"] = app.add_subcommand("export", "write networks as JSON, DOT and CSV");

    for (const auto* name : {"train", "evaluate", "importance"}) {
        auto* sub = subs[name];
        sub->add_option("--seeds", o.seeds, "number of seeds per sample");
        sub->add_flag("--pool", o.pool, "one model on the union of all samples");
        sub->add_flag("--symmetrize", o.symmetrize, "pass messages along both edge directions");
    }
    subs["train"]->add_option("--epochs", o.epochs);
    subs["train"]->add_option("--lr", o.lr);
    subs["train"]->add_option("--workers", o.workers, "parallel training runs");
    subs["importance"]->add_option("--layer", o.layer, "-1 averages layers, else 0 or 1");
    subs["importance"]->add_flag("--untrained", o.untrained, "use a zero-attention model instead of checkpoints");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : grn::ExitInputResolution;
    }

    return grn::run_guarded(
        [&] {
            const auto config = build_config(o);
            for (const auto& [name, sub] : subs) {
                if (!sub->parsed()) {
                    continue;
                }
                if (name == "aggregate") return grn::cmd_aggregate(config, std::cout);
                if (name == "metrics") return grn::cmd_metrics(config, std::cout);
                if (name == "train") return grn::cmd_train(config, std::cout);
                if (name == "evaluate") return grn::cmd_evaluate(config, std::cout);
                if (name == "importance") return grn::cmd_importance(config, std::cout);
                if (name == "gradcheck") return grn::cmd_gradcheck(config, std::cout);
                if (name == "export") return grn::cmd_export(config, std::cout);
            }
            return static_cast<int>(grn::ExitInternal);
        },
        std::cerr);
}
