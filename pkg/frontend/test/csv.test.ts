import { describe, expect, it } from 'vitest';

import { column, numericColumn, parseCsv } from '../src/csv.js';

describe('parseCsv', () => {
  it('splits header and rows', () => {
    const t = parseCsv('a,b\r\n1,2\r\n3,4\r\n');
    expect(t.header).toEqual(['a', 'b']);
    expect(t.rows).toEqual([
      ['1', '2'],
      ['3', '4'],
    ]);
  });

  it('handles quoted fields with commas, quotes, and newlines', () => {
    const t = parseCsv('x\r\n"a,""b"\r\n"line1\nline2"\r\n');
    expect(t.rows).toEqual([['a,"b'], ['line1\nline2']]);
  });

  it('handles LF-only input and missing trailing newline', () => {
    const t = parseCsv('a,b\n1,2');
    expect(t.rows).toEqual([['1', '2']]);
  });

  it('empty input gives empty table', () => {
    expect(parseCsv('')).toEqual({ header: [], rows: [] });
  });

  it('column and numericColumn accessors', () => {
    const t = parseCsv('name,v\nx,1.5\ny,\n');
    expect(column(t, 'name')).toEqual(['x', 'y']);
    expect(numericColumn(t, 'v')).toEqual([1.5, 0]);
    expect(column(t, 'missing')).toEqual([]);
  });
});
