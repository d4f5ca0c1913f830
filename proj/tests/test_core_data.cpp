#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "ctdgan/config.hpp"
#include "ctdgan/csv_io.hpp"
#include "ctdgan/error.hpp"
#include "ctdgan/folds.hpp"
#include "test_support.hpp"

namespace ctdgan {
namespace {

using testing::code_of;

CsvTable table_of(const std::string& text) {
    std::istringstream in(text);
    return parse_csv(in);
}

DatasetSchema small_schema() {
    DatasetSchema s;
    s.columns = {{"a", ColumnKind::Continuous, {}}, {"b", ColumnKind::Discrete, {"x", "y"}}};
    s.target_name = "t";
    s.class_labels = {"p", "n"};
    return s;
}

TEST(LoadCsv, MapsSchemaColumns) {
    const Dataset ds = dataset_from_table(table_of("a,b,t\n1.5,x,p\n-2,y,n\n"), small_schema());
    EXPECT_EQ(ds.num_rows(), 2u);
    EXPECT_EQ(ds.schema().continuous_indices().size(), 1u);
    EXPECT_EQ(ds.schema().discrete_indices().size(), 1u);
    EXPECT_EQ(ds.schema().num_classes(), 2u);
    EXPECT_DOUBLE_EQ(ds.at(0, 0), 1.5);
    EXPECT_DOUBLE_EQ(ds.at(1, 1), 1.0);
    EXPECT_EQ(ds.label(1), 1u);
}

TEST(LoadCsv, HeaderMayBeReordered) {
    const Dataset ds = dataset_from_table(table_of("t,b,a\np,y,3\n"), small_schema());
    EXPECT_DOUBLE_EQ(ds.at(0, 0), 3.0);
    EXPECT_DOUBLE_EQ(ds.at(0, 1), 1.0);
}

TEST(LoadCsv, Errors) {
    EXPECT_EQ(code_of([] { dataset_from_table(table_of("a,b,t\n1,z,p\n"), small_schema()); }),
              ErrorCode::UnknownCategory);
    EXPECT_EQ(code_of([] { dataset_from_table(table_of("a,t\n1,p\n"), small_schema()); }), ErrorCode::MissingColumn);
    EXPECT_EQ(code_of([] { dataset_from_table(table_of("a,b,t\nabc,x,p\n"), small_schema()); }),
              ErrorCode::NonFiniteValue);
    EXPECT_EQ(code_of([] { dataset_from_table(table_of("a,b,t\ninf,x,p\n"), small_schema()); }),
              ErrorCode::NonFiniteValue);
    EXPECT_EQ(code_of([] { dataset_from_table(table_of("a,b,t\n"), small_schema()); }), ErrorCode::EmptyDataset);
    EXPECT_EQ(code_of([] { dataset_from_table(table_of("a,b,t\n,x,p\n"), small_schema()); }),
              ErrorCode::NonFiniteValue);
    EXPECT_EQ(code_of([] { load_csv("/nonexistent/file.csv", small_schema()); }), ErrorCode::IoError);
}

TEST(LoadCsv, ClassesFromDataWhenSchemaHasNone) {
    DatasetSchema s = small_schema();
    s.class_labels.clear();
    const Dataset ds = dataset_from_table(table_of("a,b,t\n1,x,neg\n2,x,pos\n3,y,neg\n"), s);
    EXPECT_EQ(ds.schema().class_labels, (std::vector<std::string>{"neg", "pos"}));
}

TEST(ParseCsv, QuotesAndLineEndings) {
    const CsvTable t = table_of("name,v\r\n\"a, b\",1\r\n\"say \"\"hi\"\"\",2\r\n\r\n");
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0][0], "a, b");
    EXPECT_EQ(t.rows[1][0], "say \"hi\"");
    EXPECT_EQ(code_of([] { table_of("a,b\n1\n"); }), ErrorCode::ParseError);
}

TEST(InferSchema, Examples) {
    std::ostringstream csv;
    csv << "num,country,const,target\n";
    const char* countries[] = {"USA", "UK", "France"};
    for (int i = 0; i < 50; ++i) csv << 1.5 + 0.37 * i << "," << countries[i % 3] << ",7," << (i % 2 ? "a" : "b") << "\n";
    const DatasetSchema s = infer_schema(table_of(csv.str()), "target", 20);
    ASSERT_EQ(s.columns.size(), 3u);
    EXPECT_EQ(s.columns[0].kind, ColumnKind::Continuous);
    EXPECT_EQ(s.columns[1].kind, ColumnKind::Discrete);
    EXPECT_EQ(s.columns[1].categories, (std::vector<std::string>{"USA", "UK", "France"}));
    EXPECT_EQ(s.columns[2].kind, ColumnKind::Discrete);
    EXPECT_EQ(s.columns[2].categories.size(), 1u);
    EXPECT_EQ(s.target_name, "target");
    EXPECT_EQ(s.class_labels, (std::vector<std::string>{"b", "a"}));
}

TEST(InferSchema, Errors) {
    EXPECT_EQ(code_of([] { infer_schema(table_of("a,b\n1,2\n"), "t"); }), ErrorCode::TargetMissing);
    EXPECT_EQ(code_of([] { infer_schema(table_of("a,t\n"), "t"); }), ErrorCode::EmptyDataset);
}

TEST(Schema, ValidationRejectsBrokenSchemas) {
    DatasetSchema dup = small_schema();
    dup.columns[1].name = "a";
    EXPECT_EQ(code_of([&] { dup.validate(); }), ErrorCode::InvalidSchema);
    DatasetSchema target_clash = small_schema();
    target_clash.target_name = "a";
    EXPECT_EQ(code_of([&] { target_clash.validate(); }), ErrorCode::InvalidSchema);
    DatasetSchema no_cats = small_schema();
    no_cats.columns[1].categories.clear();
    EXPECT_EQ(code_of([&] { no_cats.validate(); }), ErrorCode::InvalidSchema);
    DatasetSchema one_class = small_schema();
    one_class.class_labels = {"p"};
    EXPECT_EQ(code_of([&] { one_class.validate(); }), ErrorCode::InvalidSchema);
}

TEST(Schema, JsonRoundTripAndFingerprint) {
    const DatasetSchema s = small_schema();
    const nlohmann::json j = s;
    EXPECT_EQ(j.at("target"), "t");
    EXPECT_EQ(j.at("columns")[1].at("kind"), "discrete");
    const auto back = j.get<DatasetSchema>();
    EXPECT_EQ(back, s);
    EXPECT_EQ(back.fingerprint(), s.fingerprint());
    DatasetSchema other = s;
    other.columns[1].categories = {"y", "x"};
    EXPECT_NE(other.fingerprint(), s.fingerprint());
}

TEST(Dataset, RejectsInvalidCells) {
    EXPECT_EQ(code_of([] { Dataset(small_schema(), {1.0, 2.0}, {0}); }), ErrorCode::UnknownCategory);
    EXPECT_EQ(code_of([] { Dataset(small_schema(), {1.0, 0.0}, {2}); }), ErrorCode::IndexOutOfRange);
    EXPECT_EQ(code_of([] { Dataset(small_schema(), {}, {}); }), ErrorCode::EmptyDataset);
    EXPECT_EQ(code_of([] { Dataset(small_schema(), {std::nan(""), 0.0}, {0}); }), ErrorCode::NonFiniteValue);
}

TEST(Dataset, CsvRoundTripIsExact) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto schema = testing::random_schema(rng, 3, 2, 3);
        const Dataset ds = testing::random_dataset(rng, schema, 40);
        std::ostringstream out;
        write_csv(out, ds);
        const Dataset back = dataset_from_table(table_of(out.str()), schema);
        EXPECT_EQ(back, ds);
    }
}

TEST(Dataset, ClassCountsSumToRows) {
    std::mt19937_64 rng(3);
    const Dataset ds = testing::random_dataset(rng, testing::random_schema(rng, 2, 1, 4), 77);
    const auto counts = ds.class_counts();
    EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), std::size_t{0}), ds.num_rows());
}

TEST(Dataset, SubsetAndConcat) {
    const Dataset ds(small_schema(), {1, 0, 2, 1, 3, 0}, {0, 1, 0});
    const std::vector<std::size_t> idx{2, 0};
    const Dataset sub = ds.subset(idx);
    EXPECT_DOUBLE_EQ(sub.at(0, 0), 3.0);
    EXPECT_EQ(sub.label(1), 0u);
    const Dataset both = ds.concat(sub);
    EXPECT_EQ(both.num_rows(), 5u);
    EXPECT_DOUBLE_EQ(both.at(3, 0), 3.0);
}

Dataset two_class_dataset(std::size_t per_class) {
    std::vector<double> values;
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        values.insert(values.end(), {static_cast<double>(i), 0.0});
        labels.push_back(i % 2);
    }
    return Dataset(small_schema(), values, labels);
}

TEST(StratifiedFolds, ExactDivisibility) {
    const Dataset ds = two_class_dataset(5);
    const FoldSplit split = stratified_folds(ds, 5, 1);
    ASSERT_EQ(split.folds.size(), 5u);
    EXPECT_TRUE(split.unstratified_classes.empty());
    for (const auto& f : split.folds) {
        ASSERT_EQ(f.test.size(), 2u);
        EXPECT_NE(ds.label(f.test[0]), ds.label(f.test[1]));
    }
}

TEST(StratifiedFolds, DeterministicPerSeed) {
    const Dataset ds = two_class_dataset(5);
    const auto a = stratified_folds(ds, 5, 9);
    const auto b = stratified_folds(ds, 5, 9);
    for (std::size_t f = 0; f < 5; ++f) {
        EXPECT_EQ(a.folds[f].test, b.folds[f].test);
        EXPECT_EQ(a.folds[f].train, b.folds[f].train);
    }
}

TEST(StratifiedFolds, TooManyFolds) {
    const Dataset ds = two_class_dataset(2);
    EXPECT_EQ(code_of([&] { stratified_folds(ds, 5, 0); }), ErrorCode::FoldCountExceedsRows);
}

TEST(StratifiedFolds, PartitionAndProportionProperties) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const auto schema = testing::random_schema(rng, 1, 1, 2 + trial % 3);
        const std::size_t m = 20 + static_cast<std::size_t>(trial) * 7;
        const Dataset ds = testing::random_dataset(rng, schema, m);
        const std::size_t n_folds = 2 + trial % 5;
        const FoldSplit split = stratified_folds(ds, n_folds, static_cast<std::uint64_t>(trial));
        std::vector<int> seen(m, 0);
        const auto counts = ds.class_counts();
        for (const auto& f : split.folds) {
            std::set<std::size_t> train(f.train.begin(), f.train.end());
            for (auto i : f.test) {
                EXPECT_EQ(train.count(i), 0u);
                ++seen[i];
            }
            EXPECT_EQ(f.train.size() + f.test.size(), m);
            std::vector<std::size_t> fold_counts(schema.num_classes(), 0);
            for (auto i : f.test) ++fold_counts[ds.label(i)];
            for (std::size_t y = 0; y < counts.size(); ++y) {
                const double expected = static_cast<double>(counts[y]) / static_cast<double>(n_folds);
                EXPECT_LE(std::abs(static_cast<double>(fold_counts[y]) - expected), 1.0);
            }
        }
        for (int s : seen) EXPECT_EQ(s, 1);
    }
}

TEST(StratifiedFolds, FlagsSmallClasses) {
    const Dataset ds(small_schema(), {1, 0, 2, 0, 3, 0, 4, 0, 5, 0, 6, 0}, {0, 0, 0, 0, 0, 1});
    const FoldSplit split = stratified_folds(ds, 3, 0);
    EXPECT_EQ(split.unstratified_classes, (std::vector<std::size_t>{1}));
}

TEST(TrainConfig, DefaultsAndValidation) {
    const TrainConfig cfg;
    EXPECT_EQ(cfg.epochs, 300u);
    EXPECT_EQ(cfg.batch_size, 100u);
    EXPECT_EQ(cfg.pac, 10u);
    EXPECT_EQ(cfg.latent_dim, 128u);
    EXPECT_DOUBLE_EQ(cfg.learning_rate, 2e-4);
    EXPECT_DOUBLE_EQ(cfg.weight_decay, 1e-6);
    EXPECT_NO_THROW(cfg.validate());
    TrainConfig bad = cfg;
    bad.batch_size = 95;
    EXPECT_EQ(code_of([&] { bad.validate(); }), ErrorCode::InvalidConfig);
    bad = cfg;
    bad.gumbel_temperature = 0;
    EXPECT_EQ(code_of([&] { bad.validate(); }), ErrorCode::InvalidConfig);
    bad = cfg;
    bad.epochs = 0;
    EXPECT_EQ(code_of([&] { bad.validate(); }), ErrorCode::InvalidConfig);
    const nlohmann::json j = cfg;
    EXPECT_EQ(j.get<TrainConfig>(), cfg);
}

TEST(SchemaFile, RoundTrip) {
    const auto path = std::filesystem::temp_directory_path() / "ctdgan_schema_roundtrip.json";
    write_schema_file(path, small_schema());
    EXPECT_EQ(read_schema_file(path), small_schema());
    std::filesystem::remove(path);
}

}  // namespace
}  // namespace ctdgan
