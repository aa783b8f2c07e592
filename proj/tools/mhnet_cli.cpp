#include "mhnet/checkpoint.hpp"
#include "mhnet/experiment.hpp"
#include "mhnet/io.hpp"
#include "mhnet/population.hpp"
#include "mhnet/synth.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

using namespace mhnet;

namespace {

struct ModelFlags {
    std::string preset = "custom";
    std::string toggles = "HGNN+HCNN";
    std::string encoder = "res-cheb";
    std::size_t k = 3;
    std::size_t blocks = 3;
    std::size_t hidden = 64;
    std::optional<std::size_t> epochs;
    std::optional<double> lr;
    std::optional<double> dropout;
    std::optional<double> retained_pct;
    std::string mode = "binary";
    std::size_t batch_size = 0;
    std::uint64_t seed = 0;

    void add_to(CLI::App* app, bool with_toggles) {
        app->add_option("--preset", preset, "Dataset preset")->check(CLI::IsMember(preset_names()));
        if (with_toggles) {
            app->add_option("--toggles", toggles, "Branch toggles")->check(CLI::IsMember(BranchToggles::names()));
        }
        app->add_option("--encoder", encoder, "Graph encoder")->check(CLI::IsMember({"gcn", "cheb", "res-cheb"}));
        app->add_option("--k", k, "Chebyshev order")->check(CLI::PositiveNumber);
        app->add_option("--blocks", blocks, "Encoder blocks per level")->check(CLI::PositiveNumber);
        app->add_option("--hidden", hidden, "Embedding width d")->check(CLI::PositiveNumber);
        app->add_option("--epochs", epochs, "Override the preset's epoch count");
        app->add_option("--lr", lr, "Learning rate");
        app->add_option("--dropout", dropout, "Override the preset's dropout");
        app->add_option("--retained-pct", retained_pct, "Retained-edge percentage for the level graphs");
        app->add_option("--mode", mode, "Adjacency mode")->check(CLI::IsMember({"binary", "weighted"}));
        app->add_option("--batch-size", batch_size, "Subjects per step (0 = full batch)");
        app->add_option("--seed", seed, "Root seed");
    }

    ModelConfig model() const {
        ModelConfig c;
        c.toggles = BranchToggles::parse(toggles);
        c.hgnn.encoder = parse_encoder(encoder);
        c.hgnn.K = k;
        c.hgnn.blocks = blocks;
        c.hgnn.hidden = hidden;
        c.hcnn.out_dim = hidden;
        return c;
    }

    TrainConfig train() const {
        const Preset p = mhnet::preset(preset);
        TrainConfig t;
        t.preset = preset;
        t.epochs = epochs.value_or(p.epochs);
        t.lr = lr.value_or(1e-4);
        t.dropout = dropout.value_or(p.dropout);
        t.batch_size = batch_size;
        t.seed = seed;
        return t;
    }

    GraphOptions graph() const {
        GraphOptions g;
        g.cutoff = CutoffRule::retained_percent(retained_pct.value_or(mhnet::preset(preset).retained_pct));
        g.mode = parse_adjacency_mode(mode);
        return g;
    }
};

AtlasHierarchy hierarchy_for(const std::string& file, const std::string& cohort_dir) {
    return io::read_hierarchy(file.empty() ? std::filesystem::path(cohort_dir) / "hierarchy.json"
                                           : std::filesystem::path(file));
}

void print_summary(const std::vector<RunRecord>& records) {
    for (const auto& s : summarize(records)) {
        std::cout << s.run_id << ": acc " << s.acc_mean << " +- " << s.acc_std << ", auc " << s.auc_mean << " +- "
                  << s.auc_std << " over " << s.runs << " run(s)\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical multi-view connectome classifier"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort");
    SynthSpec spec;
    std::string synth_hierarchy, synth_out;
    synth->add_option("--subjects", spec.subjects, "Number of subjects")->check(CLI::PositiveNumber);
    synth->add_option("--seed", spec.seed, "Seed");
    synth->add_option("--signal", spec.signal, "Coupling strength of the planted pairs")->check(CLI::NonNegativeNumber);
    synth->add_option("--noise", spec.noise, "Per-ROI noise scale")->check(CLI::NonNegativeNumber);
    synth->add_option("--timepoints", spec.timepoints, "Samples per subject");
    synth->add_option("--hierarchy", synth_hierarchy, "Hierarchy JSON (default: 7 networks x 2 groups x 3 ROIs)");
    synth->add_option("--out", synth_out, "Output directory")->required();

    // graphgen
    auto* graphgen = app.add_subcommand("graphgen", "Build the three level graphs of one subject");
    std::string gg_ts, gg_hier, gg_out, gg_mode = "binary";
    std::optional<double> gg_gamma, gg_pct;
    graphgen->add_option("--timeseries", gg_ts, "ROI time-series CSV")->required();
    graphgen->add_option("--hierarchy", gg_hier, "Hierarchy JSON")->required();
    auto* gamma_opt = graphgen->add_option("--gamma", gg_gamma, "Fixed cutoff");
    auto* pct_opt = graphgen->add_option("--retained-pct", gg_pct, "Retained-edge percentage");
    gamma_opt->excludes(pct_opt);
    graphgen->add_option("--mode", gg_mode, "Adjacency mode")->check(CLI::IsMember({"binary", "weighted"}));
    graphgen->add_option("--out", gg_out, "Output JSON")->required();

    // threshold-curve
    auto* curve = app.add_subcommand("threshold-curve", "Retained-edge fraction over a cutoff grid");
    std::string tc_ts, tc_hier, tc_out, tc_level = "lan";
    std::size_t tc_grid = 101;
    curve->add_option("--timeseries", tc_ts, "ROI time-series CSV")->required();
    curve->add_option("--hierarchy", tc_hier, "Hierarchy JSON")->required();
    curve->add_option("--grid", tc_grid, "Grid points on [0, 1]")->check(CLI::Range(2, 100000));
    curve->add_option("--level", tc_level, "Connectivity level")->check(CLI::IsMember({"wan", "man", "lan"}));
    curve->add_option("--out", tc_out, "Output CSV")->required();

    // train
    auto* train = app.add_subcommand("train", "Train on a 70/10/20 holdout split and save a checkpoint");
    ModelFlags train_flags;
    std::string tr_cohort, tr_hier, tr_out;
    train->add_option("--cohort", tr_cohort, "Cohort directory")->required();
    train->add_option("--hierarchy", tr_hier, "Hierarchy JSON (default: DIR/hierarchy.json)");
    train->add_option("--out", tr_out, "Checkpoint path")->required();
    train_flags.add_to(train, true);

    // eval
    auto* eval = app.add_subcommand("eval", "Score the test folds of a split plan");
    std::string ev_ckpt, ev_cohort, ev_plan, ev_out, ev_hier;
    eval->add_option("--ckpt", ev_ckpt, "Checkpoint")->required();
    eval->add_option("--cohort", ev_cohort, "Cohort directory")->required();
    eval->add_option("--split-plan", ev_plan, "Split plan JSON")->required();
    eval->add_option("--hierarchy", ev_hier, "Hierarchy JSON (default: DIR/hierarchy.json)");
    eval->add_option("--out", ev_out, "Metrics CSV")->required();

    // ablate
    auto* ablate = app.add_subcommand("ablate", "Run an ablation or sweep matrix");
    ModelFlags ab_flags;
    std::string ab_cohort, ab_hier, ab_matrix = "table4", ab_out;
    std::size_t ab_seeds = 5;
    ablate->add_option("--cohort", ab_cohort, "Cohort directory")->required();
    ablate->add_option("--hierarchy", ab_hier, "Hierarchy JSON (default: DIR/hierarchy.json)");
    ablate->add_option("--matrix", ab_matrix, "Matrix")->check(CLI::IsMember(ablation_matrix_names()));
    ablate->add_option("--seeds", ab_seeds, "Seeds per variant")->check(CLI::PositiveNumber);
    ablate->add_option("--out", ab_out, "Results CSV")->required();
    ab_flags.add_to(ablate, true);

    // popgraph
    auto* pop = app.add_subcommand("popgraph", "Population-graph classification on model embeddings");
    std::string pg_ckpt, pg_cohort, pg_pheno, pg_out, pg_hier;
    double pg_pct = 10.0;
    PopulationConfig pg_config;
    pop->add_option("--ckpt", pg_ckpt, "Checkpoint")->required();
    pop->add_option("--cohort", pg_cohort, "Cohort directory")->required();
    pop->add_option("--phenotypes", pg_pheno, "Phenotype CSV")->required();
    pop->add_option("--hierarchy", pg_hier, "Hierarchy JSON (default: DIR/hierarchy.json)");
    pop->add_option("--retain-pct", pg_pct, "Retained percentage of population edges")->check(CLI::Range(0.0, 100.0));
    pop->add_option("--epochs", pg_config.epochs, "Training epochs");
    pop->add_option("--lr", pg_config.lr, "Learning rate");
    pop->add_option("--out", pg_out, "Metrics CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            const AtlasHierarchy h = synth_hierarchy.empty() ? default_hierarchy() : io::read_hierarchy(synth_hierarchy);
            const PlantedPairs planted =
                synth_hierarchy.empty() ? default_planted(h) : parse_planted(io::read_text(synth_hierarchy), h);
            const Cohort cohort = synth_generate(spec, h, planted);
            write_cohort(cohort, synth_out, &planted);
            std::cout << "wrote " << cohort.series.size() << " subjects to " << synth_out << "\n";
        } else if (*graphgen) {
            const AtlasHierarchy h = io::read_hierarchy(gg_hier);
            const RoiTimeSeries ts = io::read_timeseries_csv(gg_ts);
            GraphOptions g;
            g.mode = parse_adjacency_mode(gg_mode);
            g.cutoff = gg_gamma ? CutoffRule::fixed_gamma(*gg_gamma)
                       : gg_pct ? CutoffRule::retained_percent(*gg_pct)
                                : CutoffRule::inflection();
            const auto graphs = build_graph_set(canonical_order(ts, h), h, g);
            io::write_text(gg_out, io::graph_set_json(graphs, ts.subject_id));
        } else if (*curve) {
            const AtlasHierarchy h = io::read_hierarchy(tc_hier);
            const RoiTimeSeries ts = io::read_timeseries_csv(tc_ts);
            const Level level = tc_level == "wan" ? Level::WAN : tc_level == "man" ? Level::MAN : Level::LAN;
            const auto cm = level_connectivity(ts, h, level);
            io::write_curve_csv(retained_edge_curve(cm, gamma_grid(tc_grid)), tc_out);
        } else if (*train) {
            const AtlasHierarchy h = hierarchy_for(tr_hier, tr_cohort);
            const Cohort cohort = read_cohort(tr_cohort, &h);
            const GraphOptions graph = train_flags.graph();
            const TrainConfig tc = train_flags.train();
            const PreparedCohort data = prepare_inputs(cohort, graph);
            const SplitPlan plan = make_splits(data.labels, SplitPlan::holdout(0.7, 0.1, tc.seed));
            FitResult fitted = fit(data.inputs, data.labels, plan.folds.front().train, train_flags.model(), tc);
            const std::string plan_json = split_plan_json(plan, data.ids);
            nlohmann::ordered_json meta;
            meta["split_plan"] = nlohmann::ordered_json::parse(plan_json);
            meta["loss_trace"] = fitted.loss_trace;
            save_checkpoint(tr_out, fitted.model, graph, tc, meta);
            io::write_text(tr_out + ".split.json", plan_json);
            std::cout << "final training loss " << fitted.loss_trace.back() << "; wrote " << tr_out << "\n";
        } else if (*eval) {
            const Checkpoint ck = load_checkpoint(ev_ckpt);
            const AtlasHierarchy h = hierarchy_for(ev_hier, ev_cohort);
            const Cohort cohort = read_cohort(ev_cohort, &h);
            const PreparedCohort data = prepare_inputs(cohort, ck.graph);
            const SplitPlan plan = parse_split_plan(io::read_text(ev_plan), data.ids);
            MhNet model = ck.make_model();
            std::vector<RunRecord> records;
            for (std::size_t f = 0; f < plan.folds.size(); ++f) {
                const auto& test = plan.folds[f].test;
                std::vector<int> labels;
                for (auto i : test) labels.push_back(data.labels[i]);
                records.push_back({model.config().toggles.name(), ck.train.seed, f,
                                   compute_metrics(predict_scores(model, data.inputs, test), labels)});
            }
            io::write_text(ev_out, metrics_csv(records));
            print_summary(records);
        } else if (*ablate) {
            const AtlasHierarchy h = hierarchy_for(ab_hier, ab_cohort);
            const Cohort cohort = read_cohort(ab_cohort, &h);
            const PreparedCohort data = prepare_inputs(cohort, ab_flags.graph());
            ExperimentConfig base;
            base.model = ab_flags.model();
            base.train = ab_flags.train();
            const auto records = run_ablation(data, ablation_matrix(ab_matrix, base.model), base, ab_seeds);
            io::write_text(ab_out, metrics_csv(records));
            print_summary(records);
        } else if (*pop) {
            const Checkpoint ck = load_checkpoint(pg_ckpt);
            const AtlasHierarchy h = hierarchy_for(pg_hier, pg_cohort);
            const Cohort cohort = read_cohort(pg_cohort, &h);
            const PreparedCohort data = prepare_inputs(cohort, ck.graph);
            if (!ck.meta.contains("split_plan")) throw std::invalid_argument("popgraph: checkpoint has no split plan");
            const SplitPlan plan = parse_split_plan(ck.meta["split_plan"].dump(), data.ids);
            const auto records = align_phenotypes(read_phenotypes_csv(pg_pheno), data.ids);
            MhNet model = ck.make_model();
            const Tensor y = embed_subjects(model, data.inputs);
            pg_config.retain_fraction = pg_pct / 100.0;
            pg_config.seed = ck.train.seed;
            const Fold& fold = plan.folds.front();
            const PopulationResult result = fit_population(y, records, data.labels, fold.train, pg_config);
            std::vector<int> labels;
            std::vector<double> pop_scores;
            for (auto i : fold.test) {
                labels.push_back(data.labels[i]);
                pop_scores.push_back(result.scores[i]);
            }
            std::vector<RunRecord> out{
                {"mhnet", ck.train.seed, 0, compute_metrics(predict_scores(model, data.inputs, fold.test), labels)},
                {"popgraph", ck.train.seed, 0, compute_metrics(pop_scores, labels)}};
            io::write_text(pg_out, metrics_csv(out));
            print_summary(out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
