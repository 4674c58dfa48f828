#include <filesystem>

#include <gtest/gtest.h>

#include "selab/config.hpp"

using namespace selab;
using nlohmann::json;

TEST(Config, SeedIsMandatory) {
    EXPECT_THROW(config_from_json(json::object()), ConfigError);
    EXPECT_THROW(config_from_json(json{{"seed", -1}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"seed", "7"}}), ConfigError);
}

TEST(Config, DefaultsFilledIn) {
    const auto c = config_from_json(json{{"seed", 7}});
    EXPECT_EQ(c.seed, 7u);
    EXPECT_EQ(c.n, 20000u);
    EXPECT_EQ(c.train_fraction, 0.75);
    EXPECT_EQ(c.folds, 5);
    EXPECT_EQ(c.augment.epsilon, 0.05);
    EXPECT_EQ(c.augment.clip, 20.0);
    EXPECT_FALSE(c.semi_synthetic);
    EXPECT_EQ(c.dgp.beta, DgpConfig::defaults().beta);
    ASSERT_TRUE(std::holds_alternative<ForestParams>(c.outcome_learner));
    EXPECT_EQ(std::get<ForestParams>(c.outcome_learner).n_trees, 200);
}

TEST(Config, UnknownKeysRejected) {
    EXPECT_THROW(config_from_json(json{{"seed", 1}, {"sead", 2}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"seed", 1}, {"augment", {{"eps", 0.1}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"seed", 1}, {"outcome_learner", {{"learner", "svm"}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"seed", 1}, {"outcome_learner", {{"learner", "logistic"}, {"params", {{"n_trees", 3}}}}}}),
                 ConfigError);
}

TEST(Config, InvalidValuesRejected) {
    EXPECT_THROW(config_from_json(json{{"seed", 1}, {"n", 0}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"seed", 1}, {"folds", 1}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"seed", 1}, {"dgp", {{"t_low", 0.7}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"seed", 1}, {"dgp", {{"k", 3}, {"beta", {1, 2}}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"seed", 1}, {"semi_synthetic", {{"threshold", 1.2}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"seed", 1}, {"augment", {{"weight_mode", "aipw"}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"seed", 1}, {"n", "many"}}), ConfigError);
}

TEST(Config, SectionsParsed) {
    const json doc = json::parse(R"({
        "seed": 3, "n": 500, "folds": 4,
        "dgp": {"k": 3, "t_low": 0.0, "gamma": 0.5},
        "semi_synthetic": {"threshold": 0.8},
        "augment": {"epsilon": 0.1, "weight_mode": "ipw"},
        "decision_learner": {"learner": "logistic", "params": {"l2": 0.1}},
        "outcome_learner": {"learner": "tree", "params": {"max_depth": 3, "mtry": 2}}
    })");
    const auto c = config_from_json(doc);
    EXPECT_EQ(c.dgp.k(), 3);
    EXPECT_EQ(c.dgp.beta, default_beta(3));
    EXPECT_EQ(c.dgp.t_low, 0.0);
    EXPECT_EQ(c.dgp.gamma, 0.5);
    ASSERT_TRUE(c.semi_synthetic);
    EXPECT_EQ(c.semi_synthetic->threshold, 0.8);
    EXPECT_EQ(c.augment.weight_mode, WeightMode::ipw);
    EXPECT_EQ(std::get<LogisticParams>(c.decision_learner).l2, 0.1);
    EXPECT_EQ(std::get<TreeParams>(c.outcome_learner).mtry, 2);

    const auto disabled = config_from_json(json{{"seed", 1}, {"semi_synthetic", {{"enabled", false}}}});
    EXPECT_FALSE(disabled.semi_synthetic);
}

TEST(Config, ResolvedDocumentRoundTrips) {
    const auto c = config_from_json(json{{"seed", 11}, {"semi_synthetic", {{"threshold", 0.9}}}});
    const auto doc = to_json(c);
    EXPECT_EQ(to_json(config_from_json(doc)).dump(), doc.dump());
}

TEST(Config, FileWithComments) {
    const auto path = std::filesystem::temp_directory_path() / "selab_config_test.json";
    write_text_file(path, "{\n  // run seed\n  \"seed\": 5,\n  \"n\": 100\n}\n");
    EXPECT_EQ(load_config(path).n, 100u);
    write_text_file(path, "{ \"seed\": 5, ");
    EXPECT_THROW(load_config(path), ConfigError);
    EXPECT_THROW(load_config(path.string() + ".missing"), ConfigError);
}
