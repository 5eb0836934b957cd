#include "ryansql/dataset.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "ryansql/errors.hpp"

#include "json.hpp"

namespace ryansql {

std::vector<DatasetExample> parse_dataset(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedDocument,
         std::string("dataset is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) {
    fail(ErrorKind::MalformedDocument, "dataset must be a JSON array");
  }
  std::vector<DatasetExample> out;
  out.reserve(doc.size());
  for (size_t i = 0; i < doc.size(); ++i) {
    const nlohmann::json& e = doc[i];
    if (!e.is_object() || !e.contains("db_id") || !e.contains("question") ||
        !e.contains("query")) {
      fail(ErrorKind::MalformedDocument,
           "dataset entry " + std::to_string(i) +
               " needs db_id, question and query");
    }
    out.push_back({e["db_id"].get<std::string>(),
                   e["question"].get<std::string>(),
                   e["query"].get<std::string>()});
  }
  return out;
}

std::vector<DatasetExample> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open dataset file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

std::string serialize_dataset(const std::vector<DatasetExample>& examples,
                              int indent) {
  nlohmann::json doc = nlohmann::json::array();
  for (const DatasetExample& e : examples) {
    doc.push_back({{"db_id", e.db_id},
                   {"question", e.question},
                   {"query", e.query}});
  }
  return doc.dump(indent);
}

std::vector<std::string> tokenize_question(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(cur);
    cur.clear();
  };
  for (size_t i = 0; i < text.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '.' && !cur.empty() && std::isdigit(cur.back()) &&
               i + 1 < text.size() &&
               std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
      cur.push_back('.');
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

namespace {

const char* kToySchemasJson = R"([
  {
    "db_id": "flights",
    "table_names_original": ["airports", "flights"],
    "column_names_original": [
      [-1, "*"],
      [0, "airport_code"],
      [0, "airport_name"],
      [0, "city"],
      [1, "flight_no"],
      [1, "source_airport"],
      [1, "dest_airport"]
    ],
    "primary_keys": [1, 4],
    "foreign_keys": [[5, 1], [6, 1]]
  },
  {
    "db_id": "shop",
    "table_names_original": ["products", "orders"],
    "column_names_original": [
      [-1, "*"],
      [0, "product_id"],
      [0, "product_name"],
      [0, "price"],
      [1, "order_id"],
      [1, "product_id"],
      [1, "quantity"]
    ],
    "primary_keys": [1, 4],
    "foreign_keys": [[5, 1]]
  }
])";

}  // namespace

ToyCorpus toy_corpus() {
  ToyCorpus corpus;
  corpus.schemas = parse_schemas(kToySchemasJson);

  auto add = [&corpus](const char* db, const char* question,
                       const char* query) {
    corpus.examples.push_back({db, question, query});
  };

  // flights: one wording per template family, weighted toward the clauses
  // with few supervision rows (ORDER BY, LIMIT, HAVING).
  add("flights", "list the city of all airports",
      "SELECT city FROM airports");
  add("flights", "list the flight no of all flights",
      "SELECT flight_no FROM flights");
  add("flights", "list the source airport of all flights",
      "SELECT source_airport FROM flights");
  add("flights", "how many airports are there",
      "SELECT count(*) FROM airports");
  add("flights", "how many flights are there",
      "SELECT count(*) FROM flights");
  add("flights", "show the distinct city of airports",
      "SELECT DISTINCT city FROM airports");
  add("flights", "show the distinct dest airport of flights",
      "SELECT DISTINCT dest_airport FROM flights");
  add("flights", "find the airport name where the city is paris",
      "SELECT airport_name FROM airports WHERE city = 'paris'");
  add("flights", "find the airport code where the city is tokyo",
      "SELECT airport_code FROM airports WHERE city = 'tokyo'");
  add("flights", "find the city where the airport code is x1",
      "SELECT city FROM airports WHERE airport_code = 'x1'");
  add("flights", "find the flight no where the dest airport is x2",
      "SELECT flight_no FROM flights WHERE dest_airport = 'x2'");
  add("flights", "find the flight no of flights above 42",
      "SELECT flight_no FROM flights WHERE flight_no > 42");
  add("flights", "find the flight no of flights below 7",
      "SELECT flight_no FROM flights WHERE flight_no < 7");
  add("flights", "list the city of airports sorted by airport name",
      "SELECT city FROM airports ORDER BY airport_name ASC");
  add("flights", "list the airport code of airports sorted by city",
      "SELECT airport_code FROM airports ORDER BY city ASC");
  add("flights", "list the airport name of airports sorted by city in reverse",
      "SELECT airport_name FROM airports ORDER BY city DESC");
  add("flights", "list the flight no of flights sorted by dest airport in reverse",
      "SELECT flight_no FROM flights ORDER BY dest_airport DESC");
  add("flights", "top 3 city of airports by airport name",
      "SELECT city FROM airports ORDER BY airport_name DESC LIMIT 3");
  add("flights", "top 5 flight no of flights by dest airport",
      "SELECT flight_no FROM flights ORDER BY dest_airport DESC LIMIT 5");
  add("flights", "top 2 airport name of airports by city",
      "SELECT airport_name FROM airports ORDER BY city DESC LIMIT 2");
  add("flights", "top 4 source airport of flights by flight no",
      "SELECT source_airport FROM flights ORDER BY flight_no DESC LIMIT 4");
  add("flights", "number of airports per city",
      "SELECT city, count(*) FROM airports GROUP BY city");
  add("flights", "number of flights per source airport",
      "SELECT source_airport, count(*) FROM flights GROUP BY source_airport");
  add("flights", "number of flights per dest airport having more than 2",
      "SELECT dest_airport, count(*) FROM flights GROUP BY dest_airport "
      "HAVING count(*) > 2");
  add("flights", "number of airports per city having more than 3",
      "SELECT city, count(*) FROM airports GROUP BY city "
      "HAVING count(*) > 3");
  add("flights", "what is the largest flight no of flights",
      "SELECT max(flight_no) FROM flights");
  add("flights", "what is the smallest flight no of flights",
      "SELECT min(flight_no) FROM flights");
  add("flights", "what is the total flight no of flights",
      "SELECT sum(flight_no) FROM flights");
  add("flights", "what is the average flight no of flights",
      "SELECT avg(flight_no) FROM flights");
  add("flights", "list the city of airports with flights",
      "SELECT city FROM airports JOIN flights "
      "ON flights.source_airport = airports.airport_code");
  add("flights", "how many flights with airports",
      "SELECT count(*) FROM airports JOIN flights "
      "ON flights.source_airport = airports.airport_code");
  add("flights", "list the airport name of all airports",
      "SELECT airport_name FROM airports");

  // shop: the same 32 families with the other vocabulary.
  add("shop", "list the product name of all products",
      "SELECT product_name FROM products");
  add("shop", "list the order id of all orders",
      "SELECT order_id FROM orders");
  add("shop", "list the quantity of all orders",
      "SELECT quantity FROM orders");
  add("shop", "how many products are there",
      "SELECT count(*) FROM products");
  add("shop", "how many orders are there",
      "SELECT count(*) FROM orders");
  add("shop", "show the distinct product name of products",
      "SELECT DISTINCT product_name FROM products");
  add("shop", "show the distinct quantity of orders",
      "SELECT DISTINCT quantity FROM orders");
  add("shop", "find the price where the product name is soap",
      "SELECT price FROM products WHERE product_name = 'soap'");
  add("shop", "find the product id where the product name is tea",
      "SELECT products.product_id FROM products WHERE product_name = 'tea'");
  add("shop", "find the product name where the product id is 5",
      "SELECT product_name FROM products WHERE products.product_id = 5");
  add("shop", "find the quantity where the order id is 2",
      "SELECT quantity FROM orders WHERE order_id = 2");
  add("shop", "find the price of products above 42",
      "SELECT price FROM products WHERE price > 42");
  add("shop", "find the quantity of orders below 7",
      "SELECT quantity FROM orders WHERE quantity < 7");
  add("shop", "list the product name of products sorted by price",
      "SELECT product_name FROM products ORDER BY price ASC");
  add("shop", "list the order id of orders sorted by quantity",
      "SELECT order_id FROM orders ORDER BY quantity ASC");
  add("shop", "list the price of products sorted by product name in reverse",
      "SELECT price FROM products ORDER BY product_name DESC");
  add("shop", "list the order id of orders sorted by quantity in reverse",
      "SELECT order_id FROM orders ORDER BY quantity DESC");
  add("shop", "top 3 product name of products by price",
      "SELECT product_name FROM products ORDER BY price DESC LIMIT 3");
  add("shop", "top 5 order id of orders by quantity",
      "SELECT order_id FROM orders ORDER BY quantity DESC LIMIT 5");
  add("shop", "top 2 price of products by product name",
      "SELECT price FROM products ORDER BY product_name DESC LIMIT 2");
  add("shop", "top 4 quantity of orders by order id",
      "SELECT quantity FROM orders ORDER BY order_id DESC LIMIT 4");
  add("shop", "number of products per price",
      "SELECT price, count(*) FROM products GROUP BY price");
  add("shop", "number of orders per product id",
      "SELECT orders.product_id, count(*) FROM orders "
      "GROUP BY orders.product_id");
  add("shop", "number of orders per quantity having more than 2",
      "SELECT quantity, count(*) FROM orders GROUP BY quantity "
      "HAVING count(*) > 2");
  add("shop", "number of products per price having more than 3",
      "SELECT price, count(*) FROM products GROUP BY price "
      "HAVING count(*) > 3");
  add("shop", "what is the largest price of products",
      "SELECT max(price) FROM products");
  add("shop", "what is the smallest price of products",
      "SELECT min(price) FROM products");
  add("shop", "what is the total quantity of orders",
      "SELECT sum(quantity) FROM orders");
  add("shop", "what is the average quantity of orders",
      "SELECT avg(quantity) FROM orders");
  add("shop", "list the product name of products with orders",
      "SELECT product_name FROM products JOIN orders "
      "ON orders.product_id = products.product_id");
  add("shop", "how many orders with products",
      "SELECT count(*) FROM products JOIN orders "
      "ON orders.product_id = products.product_id");
  add("shop", "list the price of all products",
      "SELECT price FROM products");

  return corpus;
}

}  // namespace ryansql
