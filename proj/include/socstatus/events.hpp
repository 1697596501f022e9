#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "socstatus/error.hpp"

namespace socstatus {

enum class Channel : std::uint8_t { Call, Sms, Email };

inline const char* to_string(Channel c) {
  switch (c) {
    case Channel::Call: return "CALL";
    case Channel::Sms: return "SMS";
    case Channel::Email: return "EMAIL";
  }
  return "?";
}

inline std::optional<Channel> parse_channel(std::string_view s) {
  if (s == "CALL") return Channel::Call;
  if (s == "SMS") return Channel::Sms;
  if (s == "EMAIL") return Channel::Email;
  return std::nullopt;
}

enum class TimeUnit : std::uint8_t { Month, Year };

inline const char* to_string(TimeUnit u) { return u == TimeUnit::Month ? "month" : "year"; }

inline std::optional<TimeUnit> parse_time_unit(std::string_view s) {
  if (s == "month") return TimeUnit::Month;
  if (s == "year") return TimeUnit::Year;
  return std::nullopt;
}

/// A month is 30 days and a year 365 days.
inline constexpr std::int64_t seconds_per(TimeUnit u) {
  return u == TimeUnit::Month ? 30LL * 86400LL : 365LL * 86400LL;
}

struct EventRecord {
  std::string src;
  std::string dst;
  std::int64_t timestamp = 0;
  Channel channel = Channel::Call;
  std::optional<double> duration;

  bool self_event() const { return src == dst; }

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

}  // namespace socstatus
