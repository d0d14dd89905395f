#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace tma;

namespace {

CVector constant(Eigen::Index d, Complex c) { return CVector::Constant(d, c); }

TemporalKG small_kg(std::size_t entities, std::size_t facts, std::uint64_t seed) {
    Rng rng(seed);
    KgBuilder b;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < entities; ++i) names.push_back("e" + std::to_string(i));
    b.set_entity_table(names);
    b.set_predicate_table({"p0", "p1", "p2"});
    for (std::size_t i = 0; i < facts; ++i) {
        const int y = 2000 + static_cast<int>(rng.index(5));
        b.add(names[rng.index(entities)], "p" + std::to_string(rng.index(3)), names[rng.index(entities)], y,
              y + static_cast<int>(rng.index(2)));
    }
    return std::move(b).build();
}

}  // namespace

TEST(ScoreFact, IdentityEmbeddings) {
    const auto one = constant(4, {1, 0});
    EXPECT_EQ(score_fact(one, one, one, one), 4.0);
}

TEST(ScoreFact, ImaginarySubjectGivesZero) {
    const auto one = constant(4, {1, 0});
    EXPECT_EQ(score_fact(constant(4, {0, 1}), one, one, one), 0.0);
}

TEST(ScoreFact, ShapeMismatch) {
    EXPECT_THROW(score_fact(constant(4, 1), constant(4, 1), constant(3, 1), constant(4, 1)), ShapeError);
}

TEST(ScoreFact, MatchesScalarOracle) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = oracle::random_cvector(8, rng), p = oracle::random_cvector(8, rng),
                   o = oracle::random_cvector(8, rng), t = oracle::random_cvector(8, rng);
        const double expected =
            oracle::score(oracle::to_std(s), oracle::to_std(p), oracle::to_std(o), oracle::to_std(t));
        EXPECT_NEAR(score_fact(s, p, o, t), expected, 1e-10);
    }
}

TEST(ScoreFact, ConjugateSymmetry) {
    // Re(<s, p t, conj o>) = Re(<o, conj(p) conj(t), conj s>)
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = oracle::random_cvector(6, rng), p = oracle::random_cvector(6, rng),
                   o = oracle::random_cvector(6, rng), t = oracle::random_cvector(6, rng);
        EXPECT_NEAR(score_fact(s, p, o, t), score_fact(o, p.conjugate(), s, t.conjugate()), 1e-12);
    }
}

TEST(ScoreAllObjects, IdentityTable) {
    ComplexEmbeddingTable table(3, 5);
    table.real.setOnes();
    const auto one = constant(5, {1, 0});
    const Vector scores = score_all_objects(one, one, one, table);
    ASSERT_EQ(scores.size(), 3);
    for (Eigen::Index j = 0; j < 3; ++j) EXPECT_EQ(scores[j], 5.0);
}

TEST(ScoreAllObjects, MatchesPerEntityLoop) {
    Rng rng(13);
    const auto tables = init_tables(7, 2, 3, 6, 0.5, 99);
    const auto s = oracle::random_cvector(6, rng), p = oracle::random_cvector(6, rng),
               t = oracle::random_cvector(6, rng);
    const Vector all = score_all_objects(s, p, t, tables.entities, 1);
    ASSERT_EQ(all.size(), 7);
    for (Eigen::Index j = 0; j < 7; ++j) {
        EXPECT_NEAR(all[j], score_fact(s, p, tables.entities.row(j + 1), t), 1e-12);
    }
}

TEST(TkgTraining, EmptyKgRejected) {
    EXPECT_THROW(train_tkg(TemporalKG{}, {}), InputError);
}

TEST(TkgTraining, ZeroEpochsReturnsInitialization) {
    const auto kg = small_kg(6, 8, 1);
    TkgTrainConfig cfg;
    cfg.dim = 8;
    cfg.epochs = 0;
    cfg.seed = 5;
    const auto tables = train_tkg(kg, cfg);
    EXPECT_EQ(tables, init_tables(kg.entity_count(), kg.predicate_count(), kg.time_count(), 8, cfg.init_scale, 5));
}

TEST(TkgTraining, SameSeedBitIdentical) {
    const auto kg = small_kg(8, 15, 2);
    TkgTrainConfig cfg;
    cfg.dim = 8;
    cfg.epochs = 5;
    cfg.seed = 3;
    std::vector<double> c1, c2;
    const auto a = train_tkg(kg, cfg, &c1);
    const auto b = train_tkg(kg, cfg, &c2);
    EXPECT_TRUE(a == b);
    EXPECT_EQ(c1, c2);
}

TEST(TkgTraining, GoldObjectWinsOnFiveFacts) {
    KgBuilder b;
    b.add("a", "p", "b", 2000, 2001);
    b.add("b", "p", "c", 2001, 2002);
    b.add("c", "q", "d", 2000, 2000);
    b.add("d", "q", "e", 2002, 2002);
    b.add("e", "p", "a", 2001, 2001);
    const auto kg = std::move(b).build();
    TkgTrainConfig cfg;
    cfg.dim = 16;
    cfg.epochs = 150;
    cfg.seed = 4;
    const auto tables = train_tkg(kg, cfg);
    for (const auto& tup : expand_training_tuples(kg)) {
        const Vector scores = score_all_objects(tables.entities.row(tup.subject), tables.predicates.row(tup.predicate),
                                                tables.timestamps.row(tup.time), tables.entities, 1);
        Eigen::Index best = 0;
        scores.maxCoeff(&best);
        EXPECT_EQ(best, tup.object - 1);
    }
    EXPECT_EQ(object_hits_at_1(tables, kg), 1.0);
}

TEST(TkgTraining, BatchLossGradientMatchesFiniteDifferences) {
    const auto kg = small_kg(5, 6, 7);
    auto tables = init_tables(kg.entity_count(), kg.predicate_count(), kg.time_count(), 4, 0.7, 8);
    const auto tuples = expand_training_tuples(kg);
    const double l2 = 0.05;
    auto grad = tables.zeros_like();
    tkg_batch_loss(tables, tuples, l2, &grad);
    auto loss = [&] { return tkg_batch_loss(tables, tuples, l2, nullptr); };
    std::string worst;
    const double err = oracle::max_gradient_error(tables.tensors(), grad.tensors(), loss, 1e-5, &worst);
    EXPECT_LE(err, 1e-4) << worst;
}

TEST(TkgTraining, ExpansionCoversIntervalYears) {
    KgBuilder b;
    b.add("a", "p", "b", 2000, 2004);
    b.add("a", "p", "c", 2002, 2002);
    const auto kg = std::move(b).build();
    // table years {2000, 2002, 2004}: first fact spans three of them
    EXPECT_EQ(expand_training_tuples(kg).size(), 4u);
}
