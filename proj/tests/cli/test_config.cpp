#include <gtest/gtest.h>

#include "flow360/error.hpp"
#include "run_config.hpp"

using namespace flow360;
using flow360::cli::RunConfig;

TEST(RunConfig, DumpRoundTrips) {
    RunConfig a;
    a.set("yaw", "12.5");
    a.set("method", "gradient-descent");
    a.set("glob", "flow_*.flo");
    a.set("seed", "42");
    RunConfig b;
    for (const auto& [k, v] : cli::parse_config_text(a.dump())) b.set(k, v);
    EXPECT_EQ(a.dump(), b.dump());
    EXPECT_EQ(b.method, FitMethod::GradientDescent);
    EXPECT_EQ(b.seed, 42u);
}

TEST(RunConfig, EveryKeyAppearsInDump) {
    const std::string dump = RunConfig{}.dump();
    for (const std::string& key : RunConfig::keys()) {
        EXPECT_NE(dump.find(key + " = "), std::string::npos) << key;
    }
}

TEST(RunConfig, RejectsBadInput) {
    RunConfig c;
    EXPECT_THROW(c.set("nope", "1"), Error);
    EXPECT_THROW(c.set("n_g", "eight"), Error);
    EXPECT_THROW(c.set("n_g", "8x"), Error);
    EXPECT_THROW(c.set("eps", "nan"), Error);
    EXPECT_THROW(c.set("padding", "reflect"), Error);
    c.set("n_l", "9");
    EXPECT_THROW(c.validate(), Error);
    RunConfig d;
    d.set("q", "-1");
    EXPECT_THROW(d.validate(), Error);
}

TEST(RunConfig, ParsesCommentsAndWhitespace) {
    const auto kv = cli::parse_config_text("# header\n  yaw = 10  # trailing\n\npitch=-5\n");
    ASSERT_EQ(kv.size(), 2u);
    EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"yaw", "10"}));
    EXPECT_EQ(kv[1], (std::pair<std::string, std::string>{"pitch", "-5"}));
    EXPECT_THROW(cli::parse_config_text("just words\n"), Error);
}
