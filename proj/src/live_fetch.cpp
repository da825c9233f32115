// SPDX-License-Identifier: Apache-2.0
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "scs/materialize.hpp"

#include <algorithm>

namespace scs {

Fetcher live_fetcher(std::vector<std::string> allowed_hosts)
{
    return [allowed_hosts](const PlannedFile& file) {
        const auto& url = file.source_url;
        auto scheme_end = url.find("://");
        if (url.empty() || scheme_end == std::string::npos)
            return FetchResult {false, {}, "no source url"};
        auto host_start = scheme_end + 3;
        auto path_start = url.find('/', host_start);
        auto authority = url.substr(host_start, path_start == std::string::npos ? std::string::npos : path_start - host_start);
        auto host = authority.substr(0, authority.find(':'));
        if (std::find(allowed_hosts.begin(), allowed_hosts.end(), host) == allowed_hosts.end())
            return FetchResult {false, {}, "host not allowed: " + host};

        httplib::Client client(url.substr(0, path_start));
        client.set_follow_location(true);
        client.set_connection_timeout(15);
        client.set_read_timeout(60);
        auto res = client.Get(path_start == std::string::npos ? "/" : url.substr(path_start));
        if (!res)
            return FetchResult {false, {}, httplib::to_string(res.error())};
        if (res->status != 200)
            return FetchResult {false, {}, "HTTP " + std::to_string(res->status)};
        return FetchResult {true, res->body, {}};
    };
}

}  // namespace scs
