// Sample (ChartSpec, dataset_csv) pairs, one per catalog template.

import type { ChartSpec } from '../src/api.js';

export interface ChartFixture {
  spec: ChartSpec;
  csv: string;
}

function spec(template_id: string, assignments: Record<string, string>, options: Record<string, unknown> = {}): ChartSpec {
  return { template_id, assignments, options, reasoning: 'fixture' };
}

const CATEGORY_SALES = 'category,total_sales\nFurniture,4200.5\nTechnology,6100.25\nOffice Supplies,2350.75\n';

const DATE_SERIES =
  'order date,series,total_sales\n' +
  '2017-12-01,Furniture,120.5\n2017-12-01,Technology,210.25\n' +
  '2017-12-02,Furniture,95.75\n2017-12-02,Technology,180.5\n' +
  '2017-12-03,Furniture,140.25\n2017-12-03,Technology,240.75\n';

const MONTH_SERIES =
  'month,series,total_sales\n' +
  ['January', 'February', 'March', 'April', 'May', 'June', 'July', 'August']
    .flatMap((m, i) => [`${m},A,${100 + i * 10}.5`, `${m},B,${80 + i * 7}.25`])
    .join('\n') +
  '\n';

const XY = 'sales,profit\n10.5,2.1\n20.25,4.4\n15.75,-1.2\n30.5,8.9\n25.0,6.1\n';

const XYZ =
  'sales,forecast,profit\n10.5,12.1,2.2\n20.25,22.4,4.1\n15.75,16.2,-1.3\n30.5,33.9,8.8\n25.0,27.1,6.0\n';

const QUANTITIES = 'quantity\n' + [1, 2, 2, 3, 3, 3, 4, 4, 5, 6, 2, 3].join('\n') + '\n';

const MANY_VALUES =
  'forecast\n' + Array.from({ length: 40 }, (_, i) => (100 + i * 3.7).toFixed(2)).join('\n') + '\n';

export const CHART_FIXTURES: Record<string, ChartFixture> = {
  column: {
    spec: spec('column', { label: 'category', y: 'total_sales' }, { sort_by: 'total_sales', sort_order: 'desc', top_n: 20 }),
    csv: CATEGORY_SALES,
  },
  bar: {
    spec: spec('bar', { label: 'category', y: 'total_sales' }, { top_n: 20 }),
    csv: CATEGORY_SALES,
  },
  line: {
    spec: spec('line', { x: 'order date', y: 'total_sales', color_series: 'series' }),
    csv: DATE_SERIES,
  },
  column_2: {
    spec: spec(
      'column_2',
      { x: 'order date', y: 'total_sales', color_series: 'series' },
      { second_method: true },
    ),
    csv: DATE_SERIES,
  },
  line_2: {
    spec: spec(
      'line_2',
      { x: 'order date', y: 'total_sales', color_series: 'series' },
      { second_method: true },
    ),
    csv: DATE_SERIES,
  },
  radar: {
    spec: spec('radar', { x: 'month', y: 'total_sales', color_series: 'series' }),
    csv: MONTH_SERIES,
  },
  variable_width_column: {
    spec: spec('variable_width_column', {
      label: 'category',
      width: 'total_quantity',
      height: 'total_sales_forecast',
    }),
    csv:
      'category,total_quantity,total_sales_forecast\n' +
      'Furniture,120,4400.5\nTechnology,80,6900.25\nOffice Supplies,210,2400.75\n',
  },
  column_histogram: {
    spec: spec('column_histogram', { bin_target: 'quantity' }, { frequency: 'count' }),
    csv: QUANTITIES,
  },
  line_histogram: {
    spec: spec('line_histogram', { bin_target: 'forecast' }, { frequency: 'count' }),
    csv: MANY_VALUES,
  },
  scatter: {
    spec: spec('scatter', { x: 'sales', y: 'profit' }),
    csv: XY,
  },
  scatter_2: {
    spec: spec('scatter_2', { x: 'sales', y: 'profit' }, { second_method: true }),
    csv: XY,
  },
  bubble: {
    spec: spec('bubble', { x: 'sales', y: 'forecast', size: 'profit' }),
    csv: XYZ,
  },
  three_d_area: {
    spec: spec('three_d_area', { x: 'sales', y: 'forecast', y2: 'profit' }),
    csv: XYZ,
  },
  pie: {
    spec: spec('pie', { label: 'category', angle_share: 'total_sales' }, { top_n: 20 }),
    csv: CATEGORY_SALES,
  },
  waterfall: {
    spec: spec('waterfall', { stage: 'ship status', y: 'profit_change' }),
    csv: 'ship status,profit_change\nShipped Early,500.5\nShipped On Time,-120.25\nShipped Late,310.75\n',
  },
  treemap: {
    spec: spec('treemap', {
      hierarchy_level_1: 'country',
      hierarchy_level_2: 'city',
      size: 'total_sales_forecast',
    }),
    csv:
      'country,city,total_sales_forecast\n' +
      'United States,New York,900.5\nUnited States,Chicago,640.25\n' +
      'United States,Seattle,410.5\nCanada,Toronto,380.75\nCanada,Vancouver,220.25\n',
  },
  stacked_column: {
    spec: spec('stacked_column', { x: 'order date', y: 'total_sales', color_series: 'series' }, { percent_normalized: false }),
    csv: DATE_SERIES,
  },
  stacked_100_column: {
    spec: spec('stacked_100_column', { x: 'order date', y: 'total_sales', color_series: 'series' }, { percent_normalized: true }),
    csv: DATE_SERIES,
  },
  stacked_area: {
    spec: spec('stacked_area', { x: 'month', y: 'total_sales', color_series: 'series' }, { percent_normalized: false }),
    csv: MONTH_SERIES,
  },
  stacked_100_area: {
    spec: spec('stacked_100_area', { x: 'month', y: 'total_sales', color_series: 'series' }, { percent_normalized: true }),
    csv: MONTH_SERIES,
  },
};
