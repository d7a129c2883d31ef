#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"

using namespace ioslab;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    args.insert(args.begin(), "lab_cli");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir = fs::temp_directory_path() / ("ioslab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    std::string write(const std::string& name, const std::string& text)
    {
        const auto p = (dir / name).string();
        std::ofstream(p) << text;
        return p;
    }

    std::string write_json(const std::string& name, const json& j) { return write(name, j.dump()); }

    fs::path dir;
};

const char* lin_descriptor = "dim_x = 1\ndim_u = 1\ndim_y = 1\ndx0 = -x0 + u0\ny0 = x0\n";

Certificate ios_exp()
{
    Certificate c;
    c.property = PropertyId::IOS;
    c.beta = kl::exponential(1.0);
    c.gamma = fn::zero();
    return c;
}

} // namespace

TEST_F(CliTest, CheckSinOutputIosPasses)
{
    const auto cert = write_json("ios.json", to_json(ios_exp()));
    const auto r = run({"check", "--system", "zoo:sin_output", "--property", "IOS", "--cert", cert});
    EXPECT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_EQ(j["status"], "certified");
    EXPECT_EQ(j["schema"], schema_version);
}

TEST_F(CliTest, FalsifySinOutputOlFindsPi)
{
    const auto r = run({"falsify", "--system", "zoo:sin_output", "--property", "OL", "--budget", "1000"});
    EXPECT_EQ(r.code, 1) << r.err;
    const auto j = json::parse(r.out);
    ASSERT_TRUE(j.contains("witness"));
    EXPECT_NEAR(j["witness"]["x0"][0].get<double>(), std::numbers::pi, 0.1);
}

TEST_F(CliTest, DiagramRotationPassesWithNonEdgeAndCsv)
{
    const auto out = (dir / "rep.json").string();
    const auto csv = (dir / "csv").string();
    const auto r = run({"diagram", "--system", "zoo:rotation", "--out", out, "--csv-dir", csv});
    EXPECT_EQ(r.code, 0) << r.err;
    std::ifstream in(out);
    const auto j = json::parse(in);
    EXPECT_TRUE(j["passes"].get<bool>());
    ASSERT_EQ(j["non_edges"].size(), 1u);
    EXPECT_TRUE(j["non_edges"][0]["confirmed"].get<bool>());
    ASSERT_TRUE(fs::exists(fs::path(csv) / "IOS.csv"));
    std::ifstream f(fs::path(csv) / "IOS.csv");
    std::string header;
    std::getline(f, header);
    EXPECT_EQ(header, "t,x_0,x_1,y_0,blowup_flag");
}

TEST_F(CliTest, DiagramWithBadCertificateExitsOne)
{
    Certificate bad = ios_exp();
    bad.beta = kl::outer(fn::scale(0.1), kl::exponential(1.0));
    const auto cert = write_json("bad.json", to_json(bad));
    const auto r = run({"diagram", "--system", "zoo:sin_output", "--cert", "IOS=" + cert});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("violation"), std::string::npos);
}

TEST_F(CliTest, FitThenCheckOnDescriptorFile)
{
    const auto sys = write("lin.sys", lin_descriptor);
    const auto cert = (dir / "ios.json").string();
    EXPECT_EQ(run({"fit", "--system", sys, "--property", "IOS", "--out", cert}).code, 0);
    const auto r = run({"check", "--system", sys, "--property", "IOS", "--cert", cert});
    EXPECT_EQ(r.code, 0) << r.out;
}

TEST_F(CliTest, FitWithoutCertificateExitsOne)
{
    EXPECT_EQ(run({"fit", "--system", "zoo:rotation", "--property", "IOS"}).code, 1);
}

TEST_F(CliTest, ConstructProducesVerifiableCertificate)
{
    const auto ocag = (dir / "ocag.json").string();
    ASSERT_EQ(run({"fit", "--system", "zoo:sin_output", "--property", "OCAG", "--out", ocag}).code, 0);
    const auto rec = run({"construct", "--name", "iops_from_ocag", "--cert", ocag});
    ASSERT_EQ(rec.code, 0) << rec.err;
    const auto j = json::parse(rec.out);
    EXPECT_EQ(j["name"], "iops_from_ocag");
    EXPECT_FALSE(j["trace"].get<std::string>().empty());
    const auto iops = write_json("iops.json", j["output"]);
    EXPECT_EQ(run({"check", "--system", "zoo:sin_output", "--property", "IOPS", "--cert", iops}).code, 0);
}

TEST_F(CliTest, SimulateWritesTrajectoryCsv)
{
    const auto r = run({"simulate", "--system", "zoo:lin_scalar", "--x0", "1", "--u", "0", "--horizon", "1", "--step", "0.1"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(r.out);
    std::string line, last;
    std::getline(in, line);
    EXPECT_EQ(line, "t,x_0,y_0,blowup_flag");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        last = line;
        ++rows;
    }
    EXPECT_EQ(rows, 11u);
    EXPECT_NEAR(std::stod(last.substr(last.find(',') + 1)), std::exp(-1.0), 1e-6);
}

TEST_F(CliTest, ZooListDescribeReplay)
{
    const auto l = run({"zoo", "list"});
    EXPECT_EQ(l.code, 0);
    for (const auto& id : zoo::ids()) EXPECT_NE(l.out.find(id), std::string::npos);
    const auto d = run({"zoo", "describe", "rotation"});
    EXPECT_EQ(d.code, 0);
    EXPECT_TRUE(json::accept(d.out));
    const auto r = run({"zoo", "replay", "sin_output", "--property", "OL"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(json::parse(r.out)["replays"][0]["confirmed"].get<bool>());
}

TEST_F(CliTest, ConfigFileSetsZooParameters)
{
    const auto cfg = write_json("cfg.json", {{"zoo", {{"n", 8}}}, {"plan", {{"seed", 7}}}});
    const auto r = run({"simulate", "--system", "zoo:l2_blowup", "--config", cfg, "--x0", "0,0,0,0,0,0,0,0,0", "--horizon", "0.1"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "t,x_0,x_1,x_2,x_3,x_4,x_5,x_6,x_7,x_8,y_0,y_1,y_2,y_3,y_4,y_5,y_6,y_7,y_8,blowup_flag");
}

TEST_F(CliTest, UsageErrorsExitTwo)
{
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"bogus"}).code, 2);
    EXPECT_EQ(run({"check", "--system", "zoo:sin_output"}).code, 2);
    EXPECT_EQ(run({"check", "--system", "zoo:nope", "--property", "IOS", "--cert", "x.json"}).code, 2);
    EXPECT_EQ(run({"fit", "--system", "zoo:sin_output", "--property", "NOPE"}).code, 2);
    EXPECT_EQ(run({"simulate", "--system", "zoo:lin_scalar", "--x0", "a,b"}).code, 2);
    EXPECT_EQ(run({"construct", "--name", "no_such"}).code, 2);
}

TEST_F(CliTest, RuntimeErrorsExitThree)
{
    const auto sys = write("bad.sys", "dx0 = foo(x0)\n");
    EXPECT_EQ(run({"simulate", "--system", sys, "--x0", "1"}).code, 3);
    EXPECT_EQ(run({"simulate", "--system", "zoo:lin_scalar", "--x0", "1,2"}).code, 3);
}
