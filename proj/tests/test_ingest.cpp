#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace stkde;

TEST(Ingest, BinsRecordsByHour)
{
  const std::vector<RawRecord> rec{ { "1800", "1", "1" }, { "4320", "2", "2" }, { "6840", "3", "3" } };
  const auto r = ingest_events(rec, { 0, 10, 0, 10 }, 0);
  EXPECT_EQ(r.store.count(HourIndex(0)), 1u);
  EXPECT_EQ(r.store.count(HourIndex(1)), 2u);
  EXPECT_EQ(r.dropped(), 0u);
}

TEST(Ingest, DropsAndCountsOutsideAndMalformed)
{
  const std::vector<RawRecord> rec{ { "0", "1", "1" },
                                    { "10", "11", "1" },
                                    { "20", "abc", "1" },
                                    { "-3600", "1", "1" } };
  const auto r = ingest_events(rec, { 0, 10, 0, 10 }, 0);
  EXPECT_EQ(r.store.size(), 1u);
  EXPECT_EQ(r.dropped_outside, 1u);
  EXPECT_EQ(r.dropped_malformed, 1u);
  EXPECT_EQ(r.dropped_before_epoch, 1u);
}

TEST(Ingest, EmptyAfterFilteringIsNoData)
{
  const std::vector<RawRecord> rec{ { "0", "50", "50" } };
  EXPECT_THROW(ingest_events(rec, { 0, 10, 0, 10 }, 0), NoDataError);
}

TEST(Ingest, MalformedHeaderIsFormatError)
{
  std::istringstream in("time,x,y\n0,1,1\n");
  EXPECT_THROW(read_event_csv(in, { 0, 10, 0, 10 }, 0), FormatError);
  std::istringstream empty("");
  EXPECT_THROW(read_event_csv(empty, { 0, 10, 0, 10 }, 0), FormatError);
}

TEST(Ingest, Iso8601TimestampsAndOffsets)
{
  const auto epoch = parse_epoch("2024-01-01T00:00:00Z");
  std::istringstream in("timestamp,x_km,y_km\n"
                        "2024-01-01T00:30:00Z,1,1\n"
                        "2024-01-01 01:12,2,2\n"
                        "2024-01-01T03:54:00+02:00,3,3\n");
  const auto r = read_event_csv(in, { 0, 10, 0, 10 }, epoch);
  EXPECT_EQ(r.store.count(HourIndex(0)), 1u);
  // 03:54 at +02:00 is 01:54 UTC
  EXPECT_EQ(r.store.count(HourIndex(1)), 2u);
}

TEST(Ingest, FormatDetectedPerFileNotPerRow)
{
  // the first record is epoch seconds, so the ISO row is malformed
  std::istringstream in("timestamp,x_km,y_km\n100,1,1\n2024-01-01T00:00:00Z,2,2\n");
  const auto r = read_event_csv(in, { 0, 10, 0, 10 }, 0);
  EXPECT_EQ(r.store.size(), 1u);
  EXPECT_EQ(r.dropped_malformed, 1u);
}

TEST(Ingest, DeterministicForIdenticalBytes)
{
  const std::string text = "timestamp,x_km,y_km\n7200,1,1\n10,2,2\n3700,3,3\n10,4,4\n";
  std::istringstream a(text), b(text);
  EXPECT_EQ(read_event_csv(a, { 0, 10, 0, 10 }, 0).store,
            read_event_csv(b, { 0, 10, 0, 10 }, 0).store);
}

// Oracle: the in-memory simulation, without serialisation.
TEST(Ingest, SimulatedEventsRoundTripThroughCsv)
{
  auto spec = fixtures::planted_city(5);
  spec.horizon = 440;
  const auto sim = simulate(spec);
  ASSERT_GT(sim.store.size(), 10000u);
  std::stringstream csv;
  write_event_csv(csv, sim.store, 1'700'000'000);
  const auto back = read_event_csv(csv, spec.box, 1'700'000'000);
  EXPECT_EQ(back.dropped(), 0u);
  ASSERT_EQ(back.store.size(), sim.store.size());
  for (std::int64_t t = 0; t < spec.horizon; ++t)
    ASSERT_EQ(back.store.count(HourIndex(t)), sim.store.count(HourIndex(t)));
  const auto a = sim.store.events();
  const auto b = back.store.events();
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].location.x, b[i].location.x);
    ASSERT_EQ(a[i].location.y, b[i].location.y);
  }
}
