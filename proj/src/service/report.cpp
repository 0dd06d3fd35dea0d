#include "retina/service/report.hpp"

#include <cstdio>

#include "retina/service/clock.hpp"

namespace retina::service {

namespace {

constexpr int kPageWidth = 595;  // A4 in points
constexpr int kPageHeight = 842;
constexpr int kMargin = 56;
constexpr int kLeading = 16;

struct Line {
  int x, y, size;
  bool bold;
  std::string text;
};

std::string escape(const std::string& s) {
  std::string out;
  for (unsigned char c : s) {
    if (c == '(' || c == ')' || c == '\\') {
      out += '\\';
      out += static_cast<char>(c);
    } else if (c < 0x20 || c > 0x7e) {
      out += '?';
    } else {
      out += static_cast<char>(c);
    }
  }
  return out;
}

std::string range_text(const std::optional<std::int64_t>& day, const char* open) {
  return day ? format_date(*day) : std::string(open);
}

std::vector<std::vector<Line>> layout(const ReportDocument& doc) {
  std::vector<std::vector<Line>> pages(1);
  int y = kPageHeight - kMargin;
  auto add = [&](int x, int size, bool bold, std::string text) { pages.back().push_back({x, y, size, bold, std::move(text)}); };

  add(kMargin, 18, true, "Diabetic Retinopathy Screening Report");
  y -= 2 * kLeading;
  const UserAccount& p = doc.patient;
  const std::pair<const char*, std::string> header[] = {
      {"Name", p.full_name}, {"Age", std::to_string(p.age)}, {"Email", p.email},
      {"Location", p.location}, {"Telephone", p.telephone}};
  for (const auto& [label, value] : header) {
    add(kMargin, 11, true, std::string(label) + ":");
    add(kMargin + 80, 11, false, value);
    y -= kLeading;
  }
  y -= kLeading / 2;
  add(kMargin, 11, false,
      "Start Date: " + range_text(doc.start_day, "(any)") + "    End Date: " + range_text(doc.end_day, "(any)"));
  y -= kLeading;
  add(kMargin, 11, false, "Generated: " + format_timestamp(doc.generated_at) + " UTC");
  y -= kLeading;
  add(kMargin, 11, false, "Records: " + std::to_string(doc.records.size()));
  y -= 2 * kLeading;

  const int cols[] = {kMargin, kMargin + 40, kMargin + 190, kMargin + 320};
  auto table_header = [&] {
    add(cols[0], 10, true, "#");
    add(cols[1], 10, true, "Timestamp");
    add(cols[2], 10, true, "First Eye");
    add(cols[3], 10, true, "Second Eye");
    y -= kLeading;
  };
  table_header();
  if (doc.records.empty()) add(kMargin, 10, false, "No records in this range.");
  int n = 0;
  for (const PredictionRecord& r : doc.records) {
    if (y < kMargin + kLeading) {
      pages.emplace_back();
      y = kPageHeight - kMargin;
      table_header();
    }
    add(cols[0], 10, false, std::to_string(++n));
    add(cols[1], 10, false, format_timestamp(r.timestamp));
    add(cols[2], 10, false, std::string(severity_name(r.first_eye)));
    add(cols[3], 10, false, std::string(severity_name(r.second_eye)));
    y -= kLeading;
  }
  return pages;
}

}  // namespace

Bytes render_pdf(const ReportDocument& doc) {
  const auto pages = layout(doc);
  const int page_count = static_cast<int>(pages.size());
  // Objects: 1 catalog, 2 page tree, 3 and 4 fonts, then page + content per page.
  std::vector<std::string> objects;
  std::string kids;
  for (int i = 0; i < page_count; ++i) kids += (i ? " " : "") + std::to_string(5 + 2 * i) + " 0 R";
  objects.push_back("<< /Type /Catalog /Pages 2 0 R >>");
  objects.push_back("<< /Type /Pages /Kids [" + kids + "] /Count " + std::to_string(page_count) + " >>");
  objects.push_back("<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica /Encoding /WinAnsiEncoding >>");
  objects.push_back("<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica-Bold /Encoding /WinAnsiEncoding >>");
  for (int i = 0; i < page_count; ++i) {
    std::string content;
    auto lines = pages[static_cast<std::size_t>(i)];
    lines.push_back({kPageWidth - kMargin - 60, kMargin / 2, 9, false,
                     "Page " + std::to_string(i + 1) + " of " + std::to_string(page_count)});
    for (const Line& l : lines)
      content += "BT /" + std::string(l.bold ? "F2" : "F1") + " " + std::to_string(l.size) + " Tf 1 0 0 1 " +
                 std::to_string(l.x) + " " + std::to_string(l.y) + " Tm (" + escape(l.text) + ") Tj ET\n";
    objects.push_back("<< /Type /Page /Parent 2 0 R /MediaBox [0 0 " + std::to_string(kPageWidth) + " " +
                      std::to_string(kPageHeight) + "] /Resources << /Font << /F1 3 0 R /F2 4 0 R >> >> /Contents " +
                      std::to_string(6 + 2 * i) + " 0 R >>");
    objects.push_back("<< /Length " + std::to_string(content.size()) + " >>\nstream\n" + content + "endstream");
  }

  std::string out = "%PDF-1.4\n%\xE2\xE3\xCF\xD3\n";
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    offsets.push_back(out.size());
    out += std::to_string(i + 1) + " 0 obj\n" + objects[i] + "\nendobj\n";
  }
  const std::size_t xref = out.size();
  out += "xref\n0 " + std::to_string(objects.size() + 1) + "\n0000000000 65535 f \n";
  for (std::size_t off : offsets) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%010zu 00000 n \n", off);
    out += buf;
  }
  out += "trailer\n<< /Size " + std::to_string(objects.size() + 1) + " /Root 1 0 R >>\nstartxref\n" +
         std::to_string(xref) + "\n%%EOF\n";
  return Bytes(out.begin(), out.end());
}

nlohmann::json to_json(const ReportDocument& doc) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : doc.records) records.push_back(to_json(r));
  const UserAccount& p = doc.patient;
  return {{"patient",
           {{"id", p.id},
            {"full_name", p.full_name},
            {"age", p.age},
            {"email", p.email},
            {"location", p.location},
            {"telephone", p.telephone}}},
          {"start", doc.start_day ? nlohmann::json(format_date(*doc.start_day)) : nlohmann::json(nullptr)},
          {"end", doc.end_day ? nlohmann::json(format_date(*doc.end_day)) : nlohmann::json(nullptr)},
          {"generated_at", format_timestamp(doc.generated_at)},
          {"record_count", doc.records.size()},
          {"records", records}};
}

}  // namespace retina::service
