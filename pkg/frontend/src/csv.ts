// Minimal RFC-4180 reader for the dataset_csv field: quoted fields,
// doubled quotes, CRLF or LF line ends. Cells stay strings; numeric
// interpretation happens per encoding slot at render time.

export interface DataTable {
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string): DataTable {
  const records: string[][] = [];
  let field = '';
  let record: string[] = [];
  let inQuotes = false;
  let sawAny = false;

  const pushField = () => {
    record.push(field);
    field = '';
  };
  const pushRecord = () => {
    pushField();
    records.push(record);
    record = [];
  };

  for (let i = 0; i < text.length; i++) {
    const ch = text[i];
    sawAny = true;
    if (inQuotes) {
      if (ch === '"') {
        if (text[i + 1] === '"') {
          field += '"';
          i++;
        } else {
          inQuotes = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    if (ch === '"') {
      inQuotes = true;
    } else if (ch === ',') {
      pushField();
    } else if (ch === '\r') {
      if (text[i + 1] === '\n') i++;
      pushRecord();
    } else if (ch === '\n') {
      pushRecord();
    } else {
      field += ch;
    }
  }
  if (field !== '' || record.length > 0) pushRecord();

  if (!sawAny || records.length === 0) return { header: [], rows: [] };
  const header = records[0] ?? [];
  return { header, rows: records.slice(1) };
}

export function columnIndex(table: DataTable, name: string): number {
  return table.header.indexOf(name);
}

export function column(table: DataTable, name: string): string[] {
  const idx = columnIndex(table, name);
  if (idx < 0) return [];
  return table.rows.map((r) => r[idx] ?? '');
}

export function numericColumn(table: DataTable, name: string): number[] {
  return column(table, name).map((v) => {
    const n = Number(v);
    return Number.isFinite(n) ? n : 0;
  });
}
