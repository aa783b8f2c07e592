#include "test_util.hpp"

#include "mhnet/experiment.hpp"
#include "mhnet/population.hpp"
#include "mhnet/synth.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

using namespace mhnet;
using namespace mhnet::testing;

namespace {

double pearson(const Tensor& y, std::size_t i, std::size_t j) {
    const std::size_t e = y.cols();
    double mi = 0, mj = 0;
    for (std::size_t k = 0; k < e; ++k) mi += y(i, k) / e, mj += y(j, k) / e;
    double sij = 0, sii = 0, sjj = 0;
    for (std::size_t k = 0; k < e; ++k) {
        sij += (y(i, k) - mi) * (y(j, k) - mj);
        sii += (y(i, k) - mi) * (y(i, k) - mi);
        sjj += (y(j, k) - mj) * (y(j, k) - mj);
    }
    return sij / std::sqrt(sii * sjj);
}

std::vector<PhenotypeRecord> random_records(std::size_t m, Rng& rng) {
    std::uniform_real_distribution<double> age(8, 30);
    std::vector<PhenotypeRecord> out;
    for (std::size_t i = 0; i < m; ++i)
        out.push_back({"s" + std::to_string(i), i % 2 ? "M" : "F", age(rng), "S" + std::to_string(i % 3)});
    return out;
}

double max_asym(const Tensor& a) {
    double d = 0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) d = std::max(d, std::abs(a(i, j) - a(j, i)));
    return d;
}

} // namespace

TEST(SimilarityM1, ThreeSubjectHandFormula) {
    const Tensor y = Tensor::matrix({{1, 2, 3, 4}, {2, 1, 4, 3}, {4, 3, 1, 2}});
    const Tensor m1 = similarity_m1(y);
    double rho[3][3], s2 = 0;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) rho[i][j] = 1 - pearson(y, i, j);
    s2 = (rho[0][1] * rho[0][1] + rho[0][2] * rho[0][2] + rho[1][2] * rho[1][2]) / 3;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            EXPECT_NEAR(m1(i, j), std::exp(-rho[i][j] * rho[i][j] / (2 * s2)), 1e-14);
}

TEST(SimilarityM1, IdenticalRowsAndBounds) {
    Rng rng(1);
    Tensor y = random_tensor({6, 10}, rng);
    for (std::size_t k = 0; k < 10; ++k) y(4, k) = y(1, k);
    const Tensor m1 = similarity_m1(y);
    EXPECT_NEAR(m1(1, 4), 1.0, 1e-12);
    EXPECT_LE(max_asym(m1), 1e-12);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_NEAR(m1(i, i), 1.0, 1e-12);
        for (std::size_t j = 0; j < 6; ++j) {
            EXPECT_GT(m1(i, j), 0.0);
            EXPECT_LE(m1(i, j), 1.0);
        }
    }
}

TEST(SimilarityM1, ConstantRowNamesSubject) {
    Tensor y = Tensor::matrix({{1, 2, 3}, {5, 5, 5}, {3, 1, 2}});
    try {
        similarity_m1(y, {"a", "bob", "c"});
        FAIL() << "expected an error";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("bob"), std::string::npos);
    }
    EXPECT_THROW(similarity_m1(Tensor::matrix({{1, 2}})), std::invalid_argument);
}

TEST(SimilarityM2, Examples) {
    const PhenotypeRecord a{"a", "F", 10, "S1"}, b{"b", "F", 10, "S1"}, c{"c", "M", 1000, "S2"}, d{"d", "F", 13, "S2"};
    const Tensor m2 = phenotype_similarity_m2({a, b, c, d});
    EXPECT_EQ(m2(0, 1), 1.0);
    EXPECT_LT(m2(0, 2), 1e-12);
    EXPECT_NEAR(m2(0, 3), (1.0 + 0.0 + std::exp(-9.0 / 50.0)) / 3.0, 1e-15);
    EXPECT_LE(max_asym(m2), 0.0);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(m2(i, i), 1.0);
    EXPECT_THROW(phenotype_similarity_m2({a, {"e", "", 10, "S1"}}), std::invalid_argument);
}

TEST(PhenotypeFeatures, ZScoreAndOneHot) {
    const std::vector<PhenotypeRecord> r{{"a", "F", 10, "S2"}, {"b", "M", 20, "S1"}, {"c", "F", 30, "S2"}};
    const auto vocab = PhenotypeVocabulary::from_records(r);
    EXPECT_EQ(vocab.sites, (std::vector<std::string>{"S1", "S2"}));
    const Tensor eta = phenotype_features(r, vocab);
    ASSERT_EQ(eta.shape(), (Shape{3, 5}));
    EXPECT_NEAR(eta(0, 0) + eta(1, 0) + eta(2, 0), 0.0, 1e-15);
    EXPECT_NEAR(eta(2, 0), -eta(0, 0), 1e-15);
    EXPECT_EQ(eta(1, 2), 1.0); // gender M
    EXPECT_EQ(eta(0, 4), 1.0); // site S2
    EXPECT_EQ(eta(1, 3), 1.0); // site S1
}

TEST(WeightMatrix, CosineOracle) {
    Rng rng(2);
    ad::ParamStore ps;
    add_phenotype_mlp(ps, "p", 4, rng);
    Tensor eta = random_tensor({5, 4}, rng);
    for (std::size_t k = 0; k < 4; ++k) eta(3, k) = eta(0, k);
    ad::Tape t;
    const Tensor w = weight_matrix(t, ps, "p", t.constant(eta)).value();
    // Recompute the MLP by hand: relu(eta W0 + b0) W1 + b1.
    const Tensor h = [&] {
        Tensor x = dense_matmul(eta, ps.get("p.l0.w").value);
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t k = 0; k < x.cols(); ++k) x(i, k) = std::max(0.0, x(i, k) + ps.get("p.l0.b").value[k]);
        Tensor o = dense_matmul(x, ps.get("p.l1.w").value);
        for (std::size_t i = 0; i < o.rows(); ++i)
            for (std::size_t k = 0; k < o.cols(); ++k) o(i, k) += ps.get("p.l1.b").value[k];
        return o;
    }();
    ASSERT_EQ(h.cols(), 8u);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
            double dot = 0, ni = 0, nj = 0;
            for (std::size_t k = 0; k < 8; ++k) dot += h(i, k) * h(j, k), ni += h(i, k) * h(i, k), nj += h(j, k) * h(j, k);
            EXPECT_NEAR(w(i, j), (dot / std::sqrt(ni * nj) + 1) / 2, 1e-14);
            EXPECT_GE(w(i, j), 0.0);
            EXPECT_LE(w(i, j), 1.0);
        }
    EXPECT_NEAR(w(0, 3), 1.0, 1e-14);
    EXPECT_LE(max_asym(w), 1e-12);
}

TEST(WeightMatrix, AntipodalAndZeroRows) {
    ad::Tape t;
    const Tensor w = ad::cosine_affinity(t.constant(Tensor::matrix({{1, 2}, {-1, -2}}))).value();
    EXPECT_NEAR(w(0, 1), 0.0, 1e-15);
    EXPECT_THROW(ad::cosine_affinity(t.constant(Tensor::matrix({{1, 2}, {0, 0}}))), std::invalid_argument);
}

TEST(Binarize, RetainAllAndNone) {
    Rng rng(3);
    const Tensor m1 = similarity_m1(random_tensor({6, 5}, rng));
    const Tensor m2 = phenotype_similarity_m2(random_records(6, rng));
    const Tensor w = random_tensor({6, 6}, rng, 0, 1);
    const auto all = population_adjacency(m1, m2, w, 1.0);
    EXPECT_EQ(all.c, Tensor({6, 6}, 1.0));
    EXPECT_EQ(all.a, w);
    const auto none = population_adjacency(m1, m2, w, 0.0);
    EXPECT_EQ(none.c, Tensor::identity(6));
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(none.a(i, j), i == j ? w(i, i) : 0.0);
}

TEST(Binarize, FourSubjectSortAndCut) {
    const Tensor cp = Tensor::matrix({{1, 0.9, 0.2, 0.5}, {0.9, 1, 0.4, 0.3}, {0.2, 0.4, 1, 0.7}, {0.5, 0.3, 0.7, 1}});
    // Off-diagonal values (each twice): 0.9 0.7 0.5 0.4 0.3 0.2.
    for (double q : {1.0 / 6, 2.0 / 6, 0.5, 4.0 / 6}) {
        const Tensor c = binarize_top(cp, q);
        std::vector<double> off;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j)
                if (i != j) off.push_back(cp(i, j));
        std::sort(off.rbegin(), off.rend());
        const auto keep = static_cast<std::size_t>(std::ceil(q * 12 - 1e-9));
        const double cut = off[keep - 1];
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(c(i, j), (i == j || cp(i, j) >= cut) ? 1.0 : 0.0) << q;
    }
}

TEST(Binarize, MonotoneInRetainFraction) {
    Rng rng(4);
    const Tensor cp = similarity_m1(random_tensor({12, 6}, rng));
    Tensor prev = binarize_top(cp, 0.0);
    for (int step = 1; step <= 20; ++step) {
        const Tensor c = binarize_top(cp, step / 20.0);
        for (std::size_t i = 0; i < c.size(); ++i) EXPECT_GE(c[i], prev[i]);
        EXPECT_LE(max_asym(c), 0.0);
        prev = c;
    }
}

TEST(Binarize, DegenerateInputIsAnError) {
    try {
        binarize_top(Tensor({3, 3}, 0.5), 0.3);
        FAIL() << "expected an error";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("binarization undefined"), std::string::npos);
    }
    EXPECT_THROW(binarize_top(Tensor({3, 3}), 1.5), std::invalid_argument);
}

TEST(PopulationGcn, IdentityGraphEqualsBareHead) {
    Rng rng(5);
    PopulationModel model(6, 4, PopulationConfig{});
    const Tensor y = random_tensor({7, 6}, rng);
    ad::Tape t;
    const Tensor a = model.classify(t, t.constant(y), t.constant(Tensor::identity(7))).value();
    const Tensor b = model.classify_without_graph(t, t.constant(y)).value();
    EXPECT_LE(max_abs_diff(a, b), 1e-12);
    for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(a(i, 0) + a(i, 1), 1.0, 1e-12);
}

TEST(PopulationGcn, DisconnectedComponentsAreIndependent) {
    Rng rng(6);
    PopulationModel model(5, 4, PopulationConfig{});
    const Tensor a = block_diagonal({random_graph(3, 0.8, rng, true), random_graph(4, 0.8, rng, true)});
    Tensor y = random_tensor({7, 5}, rng);
    auto run = [&](const Tensor& yy) {
        ad::Tape t;
        return model.classify(t, t.constant(yy), t.constant(a)).value();
    };
    const Tensor base = run(y);
    for (std::size_t k = 0; k < 5; ++k) y(5, k) += 1.0;
    const Tensor moved = run(y);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(moved(i, c), base(i, c));
    EXPECT_GT(std::abs(moved(3, 0) - base(3, 0)) + std::abs(moved(6, 0) - base(6, 0)), 0.0);
}

TEST(PopulationGcn, DensePropagationOracle) {
    Rng rng(7);
    PopulationConfig cfg;
    cfg.head_hidden = {};
    PopulationModel model(4, 4, cfg);
    const Tensor a = random_graph(5, 0.5, rng, true);
    const Tensor y = random_tensor({5, 4}, rng);
    ad::Tape t;
    const Tensor p = model.classify(t, t.constant(y), t.constant(a)).value();
    // D^-1/2 (A + I) D^-1/2, D = rowsum(A + I).
    Tensor ah = a;
    for (std::size_t i = 0; i < 5; ++i) ah(i, i) += 1.0;
    std::vector<double> dinv(5);
    for (std::size_t i = 0; i < 5; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 5; ++j) s += ah(i, j);
        dinv[i] = 1 / std::sqrt(s);
    }
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) ah(i, j) *= dinv[i] * dinv[j];
    Tensor h = dense_matmul(dense_matmul(ah, y), model.params().get("pop.gcn.w").value);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t k = 0; k < h.cols(); ++k) h(i, k) = std::max(0.0, h(i, k) + model.params().get("pop.gcn.b").value[k]);
    const Tensor logits = dense_matmul(h, model.params().get("pop.head.l0.w").value);
    for (std::size_t i = 0; i < 5; ++i) {
        const double l0 = logits(i, 0) + model.params().get("pop.head.l0.b").value[0];
        const double l1 = logits(i, 1) + model.params().get("pop.head.l0.b").value[1];
        EXPECT_NEAR(p(i, 1), 1 / (1 + std::exp(l0 - l1)), 1e-14);
    }
}

TEST(PopulationGcn, GradientsMatchFiniteDifferences) {
    Rng rng(8);
    const auto records = random_records(6, rng);
    const Tensor eta = phenotype_features(records, PhenotypeVocabulary::from_records(records));
    PopulationModel model(4, eta.cols(), PopulationConfig{8, {4}, 0.3, 1e-2, 1, 0});
    const Tensor y = random_tensor({6, 4}, rng);
    const Tensor c = binarize_top(similarity_m1(random_tensor({6, 5}, rng)), 0.4);
    const auto report = check_all(model.params(), [&](ad::Tape& t) {
        ad::Var a = model.adjacency(t, c, t.constant(eta));
        return ad::cross_entropy(model.classify(t, t.constant(y), a), {0, 1, 0, 1, 1, 0});
    });
    EXPECT_TRUE(report.passed) << "max rel " << report.max_rel_error;
}

TEST(PhenotypeCsv, RoundTripAndAnyColumnOrder) {
    const auto dir = std::filesystem::temp_directory_path() / "mhnet_pheno_test";
    std::filesystem::create_directories(dir);
    const std::vector<PhenotypeRecord> r{{"a", "F", 10.5, "S1"}, {"b", "M", 21, "S2"}};
    write_phenotypes_csv(r, dir / "p.csv");
    const auto back = read_phenotypes_csv(dir / "p.csv");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].subject_id, "a");
    EXPECT_EQ(back[0].age, 10.5);
    EXPECT_EQ(back[1].site, "S2");
    {
        std::ofstream f(dir / "q.csv");
        f << "site,age,subject_id,gender\nS9,40,z,F\n";
    }
    const auto q = read_phenotypes_csv(dir / "q.csv");
    ASSERT_EQ(q.size(), 1u);
    EXPECT_EQ(q[0].subject_id, "z");
    EXPECT_EQ(q[0].site, "S9");
    EXPECT_EQ(q[0].age, 40.0);
    {
        std::ofstream f(dir / "bad.csv");
        f << "subject_id,gender,site\nz,F,S1\n";
    }
    EXPECT_THROW(read_phenotypes_csv(dir / "bad.csv"), std::invalid_argument);
    {
        std::ofstream f(dir / "neg.csv");
        f << "subject_id,gender,age,site\nz,F,-3,S1\n";
    }
    EXPECT_THROW(read_phenotypes_csv(dir / "neg.csv"), std::invalid_argument);
    EXPECT_THROW(align_phenotypes(r, {"a", "c"}), std::invalid_argument);
    EXPECT_EQ(align_phenotypes(r, {"b", "a"})[0].subject_id, "b");
    std::filesystem::remove_all(dir);
}

TEST(Embed, RowsMatchForwardPass) {
    SynthSpec spec;
    spec.subjects = 6;
    spec.seed = 2;
    const AtlasHierarchy h = default_hierarchy();
    const auto data = prepare_inputs(synth_generate(spec, h, default_planted(h)), GraphOptions{});
    ModelConfig m;
    m.hgnn.hidden = m.hcnn.out_dim = 4;
    m.hgnn.blocks = 1;
    MhNet net(m, dims_of(data.inputs[0]), 3);
    std::vector<SubjectInputs> inputs = data.inputs;
    inputs.push_back(data.inputs[2]);
    const Tensor y = embed_subjects(net, inputs);
    ASSERT_EQ(y.shape(), (Shape{7, 32}));
    for (std::size_t i = 0; i < 6; ++i) {
        ad::Tape t(false);
        Rng rng(0);
        const Tensor z = net.features(t, inputs[i], false, rng).value();
        for (std::size_t k = 0; k < 32; ++k) EXPECT_EQ(y(i, k), z[k]);
    }
    for (std::size_t k = 0; k < 32; ++k) EXPECT_EQ(y(6, k), y(2, k));
}

TEST(FitPopulation, LearnsSeparableEmbeddings) {
    Rng rng(9);
    const std::size_t m = 40;
    std::vector<int> labels(m);
    Tensor y({m, 6});
    std::normal_distribution<double> n(0, 1);
    for (std::size_t i = 0; i < m; ++i) {
        labels[i] = static_cast<int>(i % 2);
        for (std::size_t k = 0; k < 6; ++k) y(i, k) = n(rng) + (labels[i] ? (k < 3 ? 2.0 : -2.0) : (k < 3 ? -2.0 : 2.0));
    }
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < 28; ++i) train.push_back(i);
    const auto r = fit_population(y, random_records(m, rng), labels, train, PopulationConfig{});
    ASSERT_EQ(r.scores.size(), m);
    EXPECT_LT(r.loss_trace.back(), r.loss_trace.front());
    std::size_t right = 0;
    for (std::size_t i = 28; i < m; ++i) right += (r.scores[i] >= 0.5) == (labels[i] == 1);
    EXPECT_GE(right, 11u);
    EXPECT_LE(max_asym(r.graph.a), 1e-12);
    for (std::size_t i = 0; i < r.graph.c.size(); ++i) EXPECT_TRUE(r.graph.c[i] == 0.0 || r.graph.c[i] == 1.0);
}
