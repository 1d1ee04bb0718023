#include <doctest.h>

#include <sstream>

#include "etfb/device.hpp"

using namespace etfb;
using namespace etfb::protocol;

TEST_CASE("commands apply in submission order") {
    DeviceSimulator dev;
    dev.submit(encode_command(make_set_stimulus({1.0, 300.0, 100.0, true})));
    dev.submit(encode_command(Start{}));
    dev.submit(encode_command(make_set_stimulus({2.0, 400.0, 150.0, true})));
    dev.submit(encode_command(Stop{}));
    const auto replies = dev.process();
    REQUIRE(replies.size() == 4);
    for (const auto& r : replies) CHECK(r.accepted);
    CHECK(dev.state().current_params == StimulusParams{2.0, 400.0, 150.0, true});
    CHECK_FALSE(dev.state().running);
    REQUIRE(dev.log().size() == 4);
    CHECK(dev.log()[1].hex == "A5 00 03 A6");
    CHECK(dev.log()[1].opcode == std::optional<Opcode>(Opcode::Start));
}

TEST_CASE("Start without a stimulus is rejected") {
    DeviceSimulator dev;
    const auto r = dev.execute(Start{});
    CHECK_FALSE(r.accepted);
    CHECK_FALSE(dev.state().running);
    CHECK_FALSE(dev.log().back().accepted);
}

TEST_CASE("corrupt frames are logged and rejected") {
    DeviceSimulator dev;
    dev.submit({0xA5, 0x00, 0x04, 0x00});
    const auto r = dev.process();
    REQUIRE(r.size() == 1);
    CHECK_FALSE(r[0].accepted);
    CHECK(r[0].error.find("checksum") != std::string::npos);
    CHECK_FALSE(dev.log()[0].opcode.has_value());
}

TEST_CASE("channel modes") {
    DeviceSimulator dev;
    dev.execute(SetChannelMode{{3, ChannelMode::Cathode}});
    CHECK(dev.state().channels[3].mode == ChannelMode::Cathode);
    CHECK(dev.state().channels[4].mode == ChannelMode::Disabled);
}

TEST_CASE("stimulation time only accrues while running") {
    DeviceSimulator dev;
    dev.advance(1.0);
    dev.execute(make_set_stimulus({1.0, 300.0, 100.0, true}));
    dev.advance(1.0);
    dev.execute(Start{});
    dev.advance(0.5);
    dev.execute(Stop{});
    dev.advance(2.0);
    CHECK(dev.clock() == doctest::Approx(4.5));
    CHECK(dev.stimulation_time() == doctest::Approx(0.5));
}

TEST_CASE("stimulating command count") {
    DeviceSimulator dev;
    dev.execute(SetChannelMode{{0, ChannelMode::Cathode}});
    const auto mark = dev.log().size();
    dev.execute(make_set_stimulus({1.0, 300.0, 100.0, true}));
    dev.execute(Start{});
    dev.execute(Stop{});
    CHECK(dev.count_stimulating_commands() == 2);
    CHECK(dev.count_stimulating_commands(mark + 1) == 1);
}

TEST_CASE("device log CSV") {
    DeviceSimulator dev;
    dev.execute(Stop{});
    std::ostringstream out;
    write_device_log_csv(out, dev.log());
    CHECK(out.str() == "t_s,hex,opcode,accepted,description,error\n0,A5 00 04 A1,04,1,Stop,\n");
}
