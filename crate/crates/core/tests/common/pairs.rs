//! Hand-labeled prediction/gold pairs for exact-set matching.

pub const ABOVE_50K: &str = "SELECT name FROM Employees WHERE salary > 50000;";
pub const SALES_MISNAMED: &str = "SELECT SUM(salary) FROM Employee WHERE dept = 'Sales';";
pub const SALES_FIXED: &str = "SELECT SUM(salary) FROM Employees WHERE department = 'Sales';";
pub const WYOMING: &str = "SELECT city_name FROM city WHERE population = ( SELECT MAX ( population ) FROM city WHERE state_name = \"wyoming\" ) AND state_name = \"wyoming\";";
pub const CURLESS: &str = "SELECT DISTINCT t1.authorid, t3.paperid FROM paperkeyphrase AS t2 JOIN keyphrase AS t5 ON t2.keyphraseid = t5.keyphraseid JOIN paper AS t3 ON t3.paperid = t2.paperid JOIN writes AS t4 ON t4.paperid = t3.paperid JOIN author AS t1 ON t4.authorid = t1.authorid WHERE t1.authorname = \"brian curless\" AND t5.keyphrasename = \"convolution\";";
pub const NIPS: &str = "SELECT DISTINCT COUNT ( t1.paperid ) , t1.year FROM venue AS t2 JOIN paper AS t1 ON t2.venueid = t1.venueid WHERE t2.venuename = \"NIPS\" GROUP BY t1.year ORDER BY COUNT ( t1.paperid ) DESC;";
pub const BIRTHDAYS: &str = "SELECT p.date_of_birth FROM people p JOIN entrepreneur e ON p.people_id = e.people_id WHERE e.company != 'Tillman Ernser';";
pub const SINGER: &str = "SELECT Country FROM singer WHERE Age > 20 GROUP BY Country;";
pub const OLD_YOUNG: &str =
    "SELECT Country FROM singer WHERE Age > 40 INTERSECT SELECT Country FROM singer WHERE Age < 30;";
pub const NO_CONCERT: &str = "SELECT Name FROM stadium WHERE Stadium_ID NOT IN (SELECT Stadium_ID FROM concert);";
pub const LADNER: &str = "SELECT COUNT(*) FROM author a JOIN writes w ON a.authorid = w.authorid JOIN paper p ON w.paperid = p.paperid JOIN venue v ON p.venueid = v.venueid WHERE a.authorname = 'Richard Ladner' AND v.venuename = 'CHI';";

/// (prediction, gold, expected EM).
pub const PAIRS: &[(&str, &str, bool)] = &[
    (ABOVE_50K, ABOVE_50K, true),
    ("select name from employees where salary > 50000", ABOVE_50K, true),
    ("SELECT name FROM Employees WHERE 50000 < salary", ABOVE_50K, true),
    ("SELECT name FROM Employees WHERE salary > 50000.0;", ABOVE_50K, true),
    ("SELECT e.name FROM Employees AS e WHERE e.salary > 50000", ABOVE_50K, true),
    ("SELECT x.name FROM Employees x WHERE 50000 < x.salary;", ABOVE_50K, true),
    ("SELECT name FROM Employees WHERE salary >= 50000", ABOVE_50K, false),
    ("SELECT name FROM Employees WHERE salary > 40000", ABOVE_50K, false),
    ("SELECT name, salary FROM Employees WHERE salary > 50000", ABOVE_50K, false),
    (SALES_MISNAMED, SALES_FIXED, false),
    ("select sum(SALARY) from EMPLOYEES where DEPARTMENT = 'Sales'", SALES_FIXED, true),
    ("SELECT SUM(salary) FROM Employees WHERE department = 'sales'", SALES_FIXED, false),
    ("SELECT AVG(salary) FROM Employees WHERE department = 'Sales'", SALES_FIXED, false),
    (
        "SELECT salary, name FROM Employees WHERE department = 'Sales'",
        "SELECT name, salary FROM Employees WHERE department = 'Sales'",
        true,
    ),
    (
        "SELECT name FROM Employees WHERE salary > 40000 AND department = 'Sales'",
        "SELECT name FROM Employees WHERE department = 'Sales' AND salary > 40000",
        true,
    ),
    (
        "SELECT name FROM Employees WHERE 40000 < salary AND id != 3 AND department = 'Sales';",
        "SELECT name FROM Employees WHERE department = 'Sales' AND salary > 40000 AND id != 3",
        true,
    ),
    (
        "SELECT name FROM Employees WHERE department = 'Sales' OR salary > 40000",
        "SELECT name FROM Employees WHERE department = 'Sales' AND salary > 40000",
        false,
    ),
    ("SELECT DISTINCT name FROM Employees WHERE salary > 50000", ABOVE_50K, false),
    (
        "SELECT name FROM Employees ORDER BY salary DESC",
        "SELECT name FROM Employees ORDER BY salary",
        false,
    ),
    (
        "SELECT name FROM Employees ORDER BY salary ASC",
        "SELECT name FROM Employees ORDER BY salary",
        true,
    ),
    (
        "SELECT name FROM Employees ORDER BY salary DESC LIMIT 2",
        "SELECT name FROM Employees ORDER BY salary DESC LIMIT 1",
        false,
    ),
    (
        "SELECT department, COUNT(*) FROM Employees GROUP BY department HAVING COUNT(*) > 2",
        "SELECT department, COUNT(*) FROM Employees GROUP BY department HAVING COUNT(*) > 1",
        false,
    ),
    (
        "SELECT COUNT(id) FROM Employees",
        "SELECT COUNT(*) FROM Employees",
        false,
    ),
    (
        "SELECT name FROM Employees WHERE department IN ('Sales', 'HR')",
        "SELECT name FROM Employees WHERE department IN ('HR', 'Sales')",
        true,
    ),
    (
        "select city_name from city where population = (select max(population) from city where state_name = 'wyoming') and state_name = 'wyoming'",
        WYOMING,
        true,
    ),
    (
        "SELECT city_name FROM city WHERE state_name = \"wyoming\" AND population = (SELECT MAX(population) FROM city WHERE state_name = \"wyoming\")",
        WYOMING,
        true,
    ),
    (
        "SELECT city_name FROM city WHERE state_name = 'wyoming' ORDER BY population DESC LIMIT 1",
        WYOMING,
        false,
    ),
    (
        "SELECT DISTINCT a1.authorid, a3.paperid FROM paperkeyphrase AS a2 JOIN keyphrase AS a5 ON a2.keyphraseid = a5.keyphraseid JOIN paper AS a3 ON a3.paperid = a2.paperid JOIN writes AS a4 ON a4.paperid = a3.paperid JOIN author AS a1 ON a4.authorid = a1.authorid WHERE a1.authorname = \"brian curless\" AND a5.keyphrasename = \"convolution\"",
        CURLESS,
        true,
    ),
    (
        "SELECT DISTINCT t3.paperid, t1.authorid FROM paperkeyphrase AS t2 JOIN keyphrase AS t5 ON t2.keyphraseid = t5.keyphraseid JOIN paper AS t3 ON t3.paperid = t2.paperid JOIN writes AS t4 ON t4.paperid = t3.paperid JOIN author AS t1 ON t4.authorid = t1.authorid WHERE t5.keyphrasename = \"convolution\" AND t1.authorname = \"brian curless\"",
        CURLESS,
        true,
    ),
    (
        "SELECT DISTINCT t1.authorid, t3.paperid FROM paperkeyphrase AS t2 JOIN keyphrase AS t5 ON t2.keyphraseid = t5.keyphraseid JOIN paper AS t3 ON t3.paperid = t2.paperid JOIN writes AS t4 ON t4.paperid = t3.paperid JOIN author AS t1 ON t4.authorid = t1.authorid WHERE t1.authorname = \"brian curless\"",
        CURLESS,
        false,
    ),
    (
        "SELECT COUNT ( t1.paperid ) , t1.year FROM venue AS t2 JOIN paper AS t1 ON t2.venueid = t1.venueid WHERE t2.venuename = \"NIPS\" GROUP BY t1.year ORDER BY COUNT ( t1.paperid ) DESC",
        NIPS,
        false,
    ),
    (
        "SELECT DISTINCT count(p.paperid), p.year FROM venue v JOIN paper p ON v.venueid = p.venueid WHERE v.venuename = 'NIPS' GROUP BY p.year ORDER BY count(p.paperid) DESC",
        NIPS,
        true,
    ),
    (
        "SELECT p.date_of_birth FROM people p JOIN entrepreneur e ON p.people_id = e.people_id WHERE e.company <> 'Tillman Ernser'",
        BIRTHDAYS,
        true,
    ),
    (
        "SELECT people.date_of_birth FROM people JOIN entrepreneur ON people.people_id = entrepreneur.people_id WHERE entrepreneur.company != 'Tillman Ernser'",
        BIRTHDAYS,
        true,
    ),
    (
        "SELECT p.date_of_birth FROM people p JOIN entrepreneur e ON p.people_id = e.people_id WHERE e.company = 'Tillman Ernser'",
        BIRTHDAYS,
        false,
    ),
    ("SELECT country FROM singer WHERE age > 20 GROUP BY country;", SINGER, true),
    ("SELECT country FROM singer WHERE age > 20", SINGER, false),
    (
        "select country from singer where age > 40 intersect select country from singer where age < 30",
        OLD_YOUNG,
        true,
    ),
    (
        "SELECT Country FROM singer WHERE Age > 40 UNION SELECT Country FROM singer WHERE Age < 30",
        OLD_YOUNG,
        false,
    ),
    (
        "SELECT Country FROM singer WHERE Age > 40 INTERSECT SELECT Country FROM singer WHERE Age < 35",
        OLD_YOUNG,
        false,
    ),
    (
        "SELECT s.Name FROM stadium AS s WHERE s.Stadium_ID NOT IN (SELECT c.Stadium_ID FROM concert AS c)",
        NO_CONCERT,
        true,
    ),
    (
        "SELECT Name FROM stadium WHERE Stadium_ID IN (SELECT Stadium_ID FROM concert)",
        NO_CONCERT,
        false,
    ),
    (
        "SELECT count(*) FROM author AS t1 JOIN writes AS t2 ON t1.authorid = t2.authorid JOIN paper AS t3 ON t2.paperid = t3.paperid JOIN venue AS t4 ON t3.venueid = t4.venueid WHERE t4.venuename = 'CHI' AND t1.authorname = 'Richard Ladner'",
        LADNER,
        true,
    ),
    (
        "SELECT count(*) FROM author AS t1 JOIN writes AS t2 ON t1.authorid = t2.authorid JOIN paper AS t3 ON t2.paperid = t3.paperid JOIN venue AS t4 ON t3.venueid = t4.venueid WHERE t4.venuename = 'chi' AND t1.authorname = 'Richard Ladner'",
        LADNER,
        false,
    ),
];
