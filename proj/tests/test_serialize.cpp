#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "icl/baselines.hpp"
#include "icl/errors.hpp"
#include "icl/plot.hpp"
#include "icl/result_table.hpp"
#include "icl/serialize.hpp"

using namespace icl;
using icl::testing::vec;

TEST(ResultTable, LongFormatCsvWithNA) {
    ResultTable t("error", {{"a", {"x", "y"}}, {"b", {"1", "2", "3"}}});
    t.set({0, 0}, 0.5);
    t.set({1, 2}, -2.0);
    t.set({0, 1}, std::nan(""));
    EXPECT_EQ(t.to_csv(), "a,b,value\nx,1,0.5\nx,2,NA\nx,3,NA\ny,1,NA\ny,2,NA\ny,3,-2\n");
    EXPECT_EQ(*t.at({"y", "3"}), -2.0);
    EXPECT_FALSE(t.at({"y", "1"}).has_value());
    EXPECT_THROW(t.at({"z", "1"}), InvalidArgument);
    EXPECT_THROW(t.set({2, 0}, 1.0), InvalidArgument);
    EXPECT_THROW(t.set({0}, 1.0), InvalidArgument);
    EXPECT_THROW(ResultTable("m", {{"empty", {}}}), InvalidArgument);
}

TEST(FormatNumber, ShortestRoundTrip) {
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(1.0 / 3.0), "0.3333333333333333");
    EXPECT_EQ(format_number(1e-300), "1e-300");
    EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
    EXPECT_EQ(format_number(std::nan("")), "NA");
    const double x = 0.7234861298734;
    EXPECT_EQ(std::stod(format_number(x)), x);
}

TEST(Json, VectorAndMatrix) {
    const Vec v = vec({1.5, -2.0});
    EXPECT_EQ(vec_from_json(to_json(v), "v"), v);
    Mat m(2, 3);
    m << 1, 2, 3, 4, 5, 6;
    EXPECT_EQ(to_json(m).dump(), "[[1.0,2.0,3.0],[4.0,5.0,6.0]]");
    EXPECT_EQ(mat_from_json(to_json(m), "m"), m);
    EXPECT_THROW(mat_from_json(Json::parse("[[1,2],[3]]"), "m"), ValidationError);
    EXPECT_THROW(vec_from_json(Json::parse("[1,\"a\"]"), "v"), ValidationError);
}

TEST(Json, PriorRoundTrip) {
    const MixturePrior p({{0.25, vec({1, 0}), vec({0, 1})}, {0.75, vec({0, 1}), vec({1, 0})}}, Hyper(0.5, 2, 3, 4),
                         true);
    const MixturePrior q = prior_from_json(to_json(p), "prior");
    ASSERT_EQ(q.size(), 2u);
    EXPECT_EQ(q.hyper(), p.hyper());
    EXPECT_TRUE(q.strict_unit_norm());
    for (std::size_t m = 0; m < 2; ++m) {
        EXPECT_EQ(q.component(m).pi, p.component(m).pi);
        EXPECT_EQ(q.component(m).mu, p.component(m).mu);
        EXPECT_EQ(q.component(m).w, p.component(m).w);
    }
}

TEST(Json, PriorErrorsNameTheField) {
    const Json bad_sigma = Json::parse(R"({"components":[{"pi":1,"mu":[0],"w":[1]}],
                                          "hyper":{"sigma_x":1,"sigma_y":-1,"sigma_mu":1,"sigma_w":1}})");
    try {
        prior_from_json(bad_sigma, "prior");
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.path(), "prior.hyper.sigma_y");
    }
    const Json bad_pi = Json::parse(R"({"components":[{"pi":0.5,"mu":[0],"w":[1]}]})");
    EXPECT_THROW(prior_from_json(bad_pi, "prior"), ValidationError);
    const Json extra = Json::parse(R"({"components":[{"pi":1,"mu":[0],"w":[1],"nu":3}]})");
    try {
        prior_from_json(extra, "prior");
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("nu"), std::string::npos);
    }
}

TEST(Json, PriorHyperDefaultsToOnes) {
    const MixturePrior p = prior_from_json(Json::parse(R"({"components":[{"pi":1,"mu":[0],"w":[1]}]})"), "prior");
    EXPECT_EQ(p.hyper(), Hyper(1, 1, 1, 1));
}

TEST(Json, ContextAndTaskRoundTrip) {
    const ContextSequence c = icl::testing::ctx1({0.5, -1.0}, {2.0, 3.0}, 4.0);
    const ContextSequence d = context_from_json(to_json(c), "ctx");
    EXPECT_EQ(d.xs, c.xs);
    EXPECT_EQ(d.ys, c.ys);
    EXPECT_EQ(d.query, c.query);
    for (FunctionKind k : {FunctionKind::linear, FunctionKind::relu_nn, FunctionKind::linear_plus_quadratic}) {
        const TaskFunction f = sample_task(k, 3, 4, 2);
        const TaskFunction g = task_from_json(to_json(f), "task");
        EXPECT_EQ(g.kind(), k);
        const Vec x = vec({0.1, 0.2, -0.3});
        EXPECT_EQ(g(x), f(x));
    }
    EXPECT_THROW(task_from_json(Json::parse(R"({"kind":"linear","dim":2,"params":{"w":[1]}})"), "task"),
                 ValidationError);
}

TEST(Json, FittedModelRoundTrip) {
    const ContextSequence c = icl::testing::ctx1({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, 0.5);
    GdOptions opt;
    opt.steps = 20;
    opt.log_every = 5;
    const FittedModel m = gd_fit(FunctionKind::linear, c, opt, 1);
    const FittedModel n = fitted_model_from_json(to_json(m), "model");
    EXPECT_EQ(n.params.w, m.params.w);
    EXPECT_EQ(n.final_loss, m.final_loss);
    EXPECT_EQ(n.training_log, m.training_log);
    EXPECT_EQ(n.predict(c.query), m.predict(c.query));
}

TEST(Json, RetrievalInstanceRecordRegenerates) {
    const EmbeddingStore store;
    const std::vector<RetrievalInstance> originals{
        make_retrieval_instance(store, 300, 6, {50, 150}, 12, 3, 7),
        make_predict_retrieve_instance(store, 1000, 4, {100, 200}, 9, FunctionKind::quadratic, 3, 8),
        make_word_classification_instance(store, 400, 6, 3, 5, 200, 10, 3, 9),
    };
    for (const RetrievalInstance& a : originals) {
        const Json rec = to_json(a);
        EXPECT_EQ(rec["schema"], kInstanceSchema);
        EXPECT_EQ(rec["embedding_id"], a.embedding_id);
        const RetrievalInstance b = regenerate_instance(Json::parse(rec.dump()), store);
        EXPECT_EQ(b.kind, a.kind);
        EXPECT_EQ(b.shift, a.shift);
        EXPECT_EQ(b.label_index, a.label_index);
        EXPECT_EQ(b.token_indices, a.token_indices);
        EXPECT_EQ(b.target_index, a.target_index);
        EXPECT_EQ(b.query, a.query);
        EXPECT_EQ(b.latent_w, a.latent_w);
        EXPECT_EQ(to_json(b), rec);
    }
}

TEST(Json, RegenerateRejectsWrongSchema) {
    const EmbeddingStore store;
    Json rec = to_json(make_retrieval_instance(store, 300, 6, {50, 150}, 4, 3, 7));
    rec["schema"] = "something-else/9";
    EXPECT_THROW(regenerate_instance(rec, store), ValidationError);
}

TEST(Plot, SvgHasOnePolylinePerSeriesAndBreaksAtNaN) {
    ChartSpec spec;
    spec.title = "t";
    spec.x_label = "T";
    spec.y_label = "err";
    spec.x_ticks = {"1", "2", "3", "4"};
    spec.log_y = true;
    const std::string svg = line_chart_svg(spec, {{"a", {1.0, 2.0, 3.0, 4.0}}, {"b", {1.0, std::nan(""), 3.0, 4.0}}});
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    std::size_t count = 0;
    for (std::size_t at = svg.find("<polyline"); at != std::string::npos; at = svg.find("<polyline", at + 1)) ++count;
    EXPECT_EQ(count, 3u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
}
