#include <algorithm>

#include "opcast/datastore.hpp"
#include "opcast/error.hpp"

namespace opcast {

AvailabilityIndex::AvailabilityIndex(std::vector<Date> dates) : dates_(std::move(dates)) {
  std::sort(dates_.begin(), dates_.end());
  dates_.erase(std::unique(dates_.begin(), dates_.end()), dates_.end());
}

bool AvailabilityIndex::contains(Date d) const { return std::binary_search(dates_.begin(), dates_.end(), d); }

AvailabilityIndex AvailabilityIndex::without(Date d) const {
  AvailabilityIndex out;
  for (Date x : dates_) {
    if (x != d) out.dates_.push_back(x);
  }
  return out;
}

Date apply_contingency(Contingency policy, Date requested, const AvailabilityIndex& index) {
  switch (policy) {
    case Contingency::latest_date: {
      const auto& dates = index.dates();
      auto it = std::lower_bound(dates.begin(), dates.end(), requested);
      if (it == dates.begin()) {
        throw Error(Errc::NoFallbackDate, format_date(requested), "no available date before the requested one");
      }
      return *std::prev(it);
    }
    case Contingency::preceding_year: {
      const Date prev = preceding_year(requested);
      if (!index.contains(prev)) {
        throw Error(Errc::NoFallbackDate, format_date(requested), format_date(prev) + " is not available");
      }
      return prev;
    }
    case Contingency::none:
      break;
  }
  throw Error(Errc::NoFallbackDate, format_date(requested), "contingency policy is none");
}

}  // namespace opcast
