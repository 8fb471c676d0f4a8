// Generated acute base triangulations. Boundary vertices come first, in
// counterclockwise order along the polygon.

/// Funnel channel, 74 acute triangles, boundary polygon through the first 24 vertices.
pub(crate) const CALCIUM_VERTICES: [[f64; 2]; 50] = [
    [0.0, 0.0],
    [0.16378598172737363, 0.13102878538190005],
    [0.24482976451382893, 0.1958638116110652],
    [0.3333333333333333, 0.26666666666666666],
    [0.49999999997742783, 0.26666666666666666],
    [0.6666666666666666, 0.26666666666666666],
    [0.7551702354976945, 0.19586381160184524],
    [0.8362140182864365, 0.13102878537085258],
    [1.0, 0.0],
    [1.0, 0.20974840062229533],
    [1.0, 0.33731814041898844],
    [1.0, 0.4529121299032586],
    [1.0, 0.6666666666666666],
    [0.8330857493645116, 0.5331352661582862],
    [0.7493775595750612, 0.46616871432671714],
    [0.6666666666666666, 0.4],
    [0.49999999997742905, 0.4],
    [0.3333333333333333, 0.4],
    [0.25062244045201854, 0.46616871430505313],
    [0.1669142506534712, 0.5331352661438986],
    [0.0, 0.6666666666666666],
    [0.0, 0.4529121298802318],
    [0.0, 0.33731814046867015],
    [0.0, 0.2097484006399807],
    [0.15599735859273153, 0.21487228130726432],
    [0.09086167457709109, 0.18904641409302345],
    [0.18851644630980718, 0.32760060502477173],
    [0.18836332573127695, 0.2644540648083297],
    [0.23512586937894028, 0.283869741019815],
    [0.08558833514078168, 0.29599157735484966],
    [0.25929596678640326, 0.3333333333374647],
    [0.23137313153501476, 0.3956279348195547],
    [0.159998618371407, 0.4422119548969864],
    [0.085440975899201, 0.4067527462206636],
    [0.15452411110678557, 0.3785362764609758],
    [0.09259605826734434, 0.474009011770392],
    [0.3473200384845086, 0.3333333333355668],
    [0.8440026414219646, 0.2148722812923089],
    [0.9091383254305756, 0.18904641407708622],
    [0.8114835537181022, 0.3276006050123856],
    [0.8116366742881947, 0.2644540647949062],
    [0.9144116648704621, 0.2959915773275564],
    [0.7648741306458896, 0.283869741012644],
    [0.7407040332366641, 0.33333333333746495],
    [0.768626868502426, 0.3956279348371951],
    [0.8400013816869852, 0.4422119549421739],
    [0.8454758889341624, 0.3785362764440061],
    [0.9145590241174938, 0.4067527461689983],
    [0.9074039417426295, 0.47400901179114824],
    [0.6526799615196585, 0.33333333333556714],
];

pub(crate) const CALCIUM_TRIANGLES: [[usize; 3]; 74] = [
    [1, 25, 0],
    [2, 28, 27],
    [1, 2, 24],
    [31, 18, 32],
    [0, 25, 23],
    [31, 30, 17],
    [4, 36, 3],
    [23, 25, 29],
    [29, 22, 23],
    [28, 3, 30],
    [19, 32, 18],
    [33, 22, 29],
    [21, 35, 20],
    [21, 22, 33],
    [31, 34, 26],
    [19, 35, 32],
    [29, 24, 27],
    [29, 27, 26],
    [24, 2, 27],
    [3, 36, 30],
    [17, 30, 36],
    [26, 30, 31],
    [1, 24, 25],
    [28, 2, 3],
    [7, 38, 37],
    [6, 37, 40],
    [9, 38, 8],
    [21, 33, 35],
    [29, 34, 33],
    [37, 6, 7],
    [26, 28, 30],
    [5, 42, 43],
    [24, 29, 25],
    [16, 49, 15],
    [40, 42, 6],
    [26, 27, 28],
    [48, 12, 13],
    [13, 14, 45],
    [29, 26, 34],
    [31, 17, 18],
    [41, 47, 46],
    [32, 33, 34],
    [32, 34, 31],
    [5, 43, 49],
    [20, 35, 19],
    [32, 35, 33],
    [4, 16, 36],
    [16, 17, 36],
    [10, 41, 9],
    [11, 48, 47],
    [9, 41, 38],
    [8, 38, 7],
    [43, 44, 15],
    [40, 37, 41],
    [37, 38, 41],
    [42, 40, 39],
    [45, 47, 48],
    [39, 40, 41],
    [43, 42, 39],
    [6, 42, 5],
    [44, 43, 39],
    [15, 49, 43],
    [46, 39, 41],
    [15, 44, 14],
    [14, 44, 45],
    [44, 39, 46],
    [44, 46, 45],
    [47, 41, 10],
    [11, 47, 10],
    [45, 46, 47],
    [12, 48, 11],
    [13, 45, 48],
    [4, 5, 49],
    [16, 4, 49],
];

/// Unit square, 64 acute triangles, boundary polygon through the first 12 vertices.
pub(crate) const SQUARE_VERTICES: [[f64; 2]; 39] = [
    [0.0, 0.0],
    [0.3679009095684778, 0.0],
    [0.6765979374624835, 0.0],
    [1.0, 0.0],
    [1.0, 0.3163537907847986],
    [1.0, 0.5814525105734393],
    [1.0, 1.0],
    [0.5812903892577302, 1.0],
    [0.31530380994085583, 1.0],
    [0.0, 1.0],
    [0.0, 0.6840401609033145],
    [0.0, 0.37429611237003335],
    [0.23796642984961347, 0.23300662413980536],
    [0.4237680842993882, 0.45240478500509373],
    [0.39738486289772945, 0.2559015152792361],
    [0.5371467908706048, 0.19895907690902742],
    [0.3273684588873571, 0.5627749854393117],
    [0.651076237363027, 0.24160748566697224],
    [0.2693296341094363, 0.3921156507948288],
    [0.5447283833369984, 0.2801508798179812],
    [0.8076273262059613, 0.21813812889894632],
    [0.7074387320161482, 0.45446172454526473],
    [0.7842028313393361, 0.32316796207895454],
    [0.6146227810651999, 0.3622838593536436],
    [0.19942595081708467, 0.5458307511694799],
    [0.82999650503321, 0.439224424843264],
    [0.4530641536211704, 0.6830684738047602],
    [0.5461043923865628, 0.5401545086473658],
    [0.39322856888195096, 0.5956259862570743],
    [0.3045373619841734, 0.6975954077654429],
    [0.24024721264692261, 0.6675349792680796],
    [0.34169887742206967, 0.7909666372108711],
    [0.5370313233365506, 0.7821764557612559],
    [0.4387801701841402, 0.8293768914637039],
    [0.608173171908529, 0.6079624033776659],
    [0.7878162885897902, 0.6453088894174436],
    [0.782868307711576, 0.5370080907513782],
    [0.6456229475442262, 0.787278232290475],
    [0.21424736225969246, 0.8069851537495253],
];

pub(crate) const SQUARE_TRIANGLES: [[usize; 3]; 64] = [
    [1, 12, 0],
    [17, 20, 22],
    [18, 11, 12],
    [15, 19, 14],
    [10, 30, 38],
    [14, 18, 12],
    [31, 8, 38],
    [13, 19, 23],
    [0, 12, 11],
    [19, 17, 23],
    [20, 17, 2],
    [10, 11, 24],
    [27, 13, 23],
    [12, 1, 14],
    [37, 7, 32],
    [28, 29, 16],
    [1, 2, 15],
    [13, 16, 18],
    [15, 2, 17],
    [28, 13, 27],
    [20, 2, 3],
    [15, 14, 1],
    [13, 18, 14],
    [11, 18, 24],
    [14, 19, 13],
    [15, 17, 19],
    [3, 4, 20],
    [22, 20, 4],
    [25, 21, 22],
    [32, 34, 37],
    [23, 22, 21],
    [25, 22, 4],
    [22, 23, 17],
    [21, 34, 27],
    [16, 24, 18],
    [30, 16, 29],
    [4, 5, 25],
    [5, 35, 36],
    [32, 7, 33],
    [10, 24, 30],
    [21, 27, 23],
    [28, 27, 26],
    [28, 26, 29],
    [13, 28, 16],
    [31, 29, 26],
    [29, 31, 38],
    [16, 30, 24],
    [38, 30, 29],
    [31, 26, 33],
    [32, 33, 26],
    [26, 34, 32],
    [34, 21, 36],
    [8, 31, 33],
    [7, 8, 33],
    [27, 34, 26],
    [21, 25, 36],
    [5, 6, 35],
    [37, 6, 7],
    [5, 36, 25],
    [34, 36, 35],
    [6, 37, 35],
    [35, 37, 34],
    [8, 9, 38],
    [10, 38, 9],
];
