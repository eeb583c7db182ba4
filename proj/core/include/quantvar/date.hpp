#pragma once

#include <chrono>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace qv {

/// Calendar day. Stored as days since the Unix epoch.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::sys_days d) : days_(d) {}
    constexpr Date(int year, unsigned month, unsigned day)
        : days_(std::chrono::year_month_day{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}}) {}

    /// Parses YYYY-MM-DD. A trailing time component ("T00:00:00...") is ignored.
    [[nodiscard]] static std::optional<Date> parse(std::string_view text);
    [[nodiscard]] static Date parse_or_throw(std::string_view text);

    [[nodiscard]] std::string to_string() const;
    [[nodiscard]] constexpr std::chrono::sys_days days() const noexcept { return days_; }
    [[nodiscard]] constexpr long serial() const noexcept { return days_.time_since_epoch().count(); }
    [[nodiscard]] constexpr Date plus_days(long n) const noexcept { return Date{days_ + std::chrono::days{n}}; }

    constexpr auto operator<=>(const Date&) const = default;

private:
    std::chrono::sys_days days_{};
};

}  // namespace qv
